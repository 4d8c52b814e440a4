import numpy as np
import pytest

from rainmix import Image, save_image, write_pfm


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(key=20250401))


def rand_image(rng, h, w, c=3) -> Image:
    return Image(rng.random((h, w, c)))


def make_dataset(root, n_pairs, h, w, seed=7, max_depth=120.0):
    """Write n_pairs of clean PNGs and matching PFM depth ramps."""
    clean_dir = root / "clean"
    depth_dir = root / "depth"
    clean_dir.mkdir(parents=True, exist_ok=True)
    depth_dir.mkdir(parents=True, exist_ok=True)
    gen = np.random.Generator(np.random.Philox(key=seed))
    ramp = np.tile(np.linspace(0.0, max_depth, w), (h, 1))
    for i in range(n_pairs):
        stem = f"scene_{i:03d}"
        save_image(Image(gen.random((h, w, 3))), clean_dir / f"{stem}.png", bits=8)
        wobble = 0.05 * max_depth * gen.random((h, w))
        write_pfm(depth_dir / f"{stem}.pfm", ramp + wobble)
    return clean_dir, depth_dir
