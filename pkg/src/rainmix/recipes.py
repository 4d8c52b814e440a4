"""Synthesis parameter sets and their serialization.

A RainRecipe aggregates every knob of the degradation model plus the RNG
seed, so a sample is fully reproducible from its recipe alone. Recipes
round-trip losslessly through plain dicts (for JSONL manifests) and
through an INI-style ``key = value`` config file (see docs/config.md).
Unknown keys are rejected in both directions.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass

import numpy as np

_MAX_SEED = 2**64 - 1


def _check_range(name: str, rng: tuple, lo=None, hi=None) -> tuple[float, float]:
    a, b = (float(rng[0]), float(rng[1]))
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError(f"{name}: range bounds must be finite")
    if a > b:
        raise ValueError(f"{name}: range must be ordered min <= max, got {rng}")
    if lo is not None and a < lo:
        raise ValueError(f"{name}: range must be >= {lo}, got {rng}")
    if hi is not None and b > hi:
        raise ValueError(f"{name}: range must be <= {hi}, got {rng}")
    return (a, b)


def _check_rgb(name: str, v: tuple) -> tuple[float, float, float]:
    t = tuple(float(x) for x in v)
    if len(t) != 3:
        raise ValueError(f"{name}: expected an RGB triple, got {v!r}")
    if any(not np.isfinite(x) or x < 0.0 or x > 1.0 for x in t):
        raise ValueError(f"{name}: components must lie in [0, 1], got {v!r}")
    return t


@dataclass(frozen=True)
class StreakParams:
    """Rain-streak layer parameters.

    attenuation: depth attenuation coefficient of streak visibility
        (per inverse depth unit).
    density: streaks per megapixel.
    angle_mean / angle_jitter: streak angle in degrees from vertical
        (0 = falling straight down; the jitter is a normal sigma).
    length_range / width_range: segment extent in pixels.
    intensity_range: additive streak brightness, inside [0, 1].
    """

    attenuation: float = 0.008
    density: float = 150.0
    angle_mean: float = 8.0
    angle_jitter: float = 4.0
    length_range: tuple[float, float] = (25.0, 45.0)
    width_range: tuple[float, float] = (1.0, 2.0)
    intensity_range: tuple[float, float] = (0.15, 0.55)

    def __post_init__(self):
        if not (self.attenuation >= 0):
            raise ValueError("StreakParams: attenuation must be >= 0")
        if not (self.density >= 0):
            raise ValueError("StreakParams: density must be >= 0")
        if not (self.angle_jitter >= 0):
            raise ValueError("StreakParams: angle_jitter must be >= 0")
        object.__setattr__(self, "length_range",
                           _check_range("length_range", self.length_range, lo=0.0))
        object.__setattr__(self, "width_range",
                           _check_range("width_range", self.width_range, lo=0.0))
        object.__setattr__(self, "intensity_range",
                           _check_range("intensity_range", self.intensity_range,
                                        lo=0.0, hi=1.0))


@dataclass(frozen=True)
class DropParams:
    """Adherent raindrop field parameters.

    count_density: drops per megapixel.
    radius_log_mean / radius_log_sigma: lognormal radius parameters
        (pixels; radius = exp(N(mean, sigma))).
    thickness_max: peak of the drop thickness profile, in (0, 1].
    mask_threshold: thickness above which a pixel counts as corrupted;
        must stay below thickness_max so the mask is non-degenerate.
    """

    count_density: float = 40.0
    radius_log_mean: float = 2.2
    radius_log_sigma: float = 0.35
    thickness_max: float = 0.9
    mask_threshold: float = 0.05

    def __post_init__(self):
        if not (self.count_density >= 0):
            raise ValueError("DropParams: count_density must be >= 0")
        if not (np.isfinite(self.radius_log_mean) and np.isfinite(self.radius_log_sigma)):
            raise ValueError("DropParams: radius parameters must be finite")
        if self.radius_log_sigma < 0:
            raise ValueError("DropParams: radius_log_sigma must be >= 0")
        if not (0.0 < self.thickness_max <= 1.0):
            raise ValueError("DropParams: thickness_max must be in (0, 1]")
        if not (0.0 < self.mask_threshold < 1.0):
            raise ValueError("DropParams: mask_threshold must be in (0, 1)")
        if not (self.mask_threshold < self.thickness_max):
            raise ValueError("DropParams: mask_threshold must be < thickness_max")


@dataclass(frozen=True)
class HazeParams:
    """Rainy-haze parameters.

    scattering: depth scattering coefficient (per inverse depth unit).
    atmosphere_light: global atmosphere light used by the plain haze model.
    ambient_light: ambient light / colour cast used by the combined model
        (a free RGB parameter; dim values model nighttime scenes).
    """

    scattering: float = 0.012
    atmosphere_light: tuple[float, float, float] = (0.82, 0.82, 0.84)
    ambient_light: tuple[float, float, float] = (0.78, 0.78, 0.82)

    def __post_init__(self):
        if not (self.scattering >= 0):
            raise ValueError("HazeParams: scattering must be >= 0")
        object.__setattr__(self, "atmosphere_light",
                           _check_rgb("atmosphere_light", self.atmosphere_light))
        object.__setattr__(self, "ambient_light",
                           _check_rgb("ambient_light", self.ambient_light))


@dataclass(frozen=True)
class RainRecipe:
    """All synthesis parameters plus the 64-bit RNG seed."""

    streak: StreakParams = StreakParams()
    drops: DropParams = DropParams()
    haze: HazeParams = HazeParams()
    seed: int = 0

    def __post_init__(self):
        if not (0 <= int(self.seed) <= _MAX_SEED):
            raise ValueError("RainRecipe: seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self) -> dict:
        """Plain-dict form used in JSONL manifests (lossless round trip)."""
        return {
            "seed": self.seed,
            "streak": dataclasses.asdict(self.streak),
            "drops": dataclasses.asdict(self.drops),
            "haze": dataclasses.asdict(self.haze),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RainRecipe":
        unknown = set(d) - {"seed", "streak", "drops", "haze"}
        if unknown:
            raise ValueError(f"RainRecipe: unknown keys {sorted(unknown)}")
        return cls(
            streak=_params_from_dict(StreakParams, d.get("streak", {})),
            drops=_params_from_dict(DropParams, d.get("drops", {})),
            haze=_params_from_dict(HazeParams, d.get("haze", {})),
            seed=d.get("seed", 0),
        )


@dataclass(frozen=True)
class RecipeJitter:
    """Optional per-sample uniform jitter ranges applied to a template.

    Each field, when set, is a (lo, hi) range sampled uniformly per sample.
    Draw order is fixed: attenuation, scattering, density, count_density.
    """

    attenuation: tuple[float, float] | None = None
    scattering: tuple[float, float] | None = None
    density: tuple[float, float] | None = None
    count_density: tuple[float, float] | None = None

    def __post_init__(self):
        for name in ("attenuation", "scattering", "density", "count_density"):
            rng = getattr(self, name)
            if rng is not None:
                object.__setattr__(self, name, _check_range(f"jitter.{name}", rng, lo=0.0))

    def is_empty(self) -> bool:
        return all(getattr(self, f.name) is None for f in dataclasses.fields(self))


def apply_jitter(template: RainRecipe, jitter: RecipeJitter | None,
                 rng: np.random.Generator) -> RainRecipe:
    """Materialize a concrete recipe by drawing jittered parameters."""
    if jitter is None or jitter.is_empty():
        return template
    streak, haze, drops = template.streak, template.haze, template.drops
    if jitter.attenuation is not None:
        streak = dataclasses.replace(streak, attenuation=float(rng.uniform(*jitter.attenuation)))
    if jitter.scattering is not None:
        haze = dataclasses.replace(haze, scattering=float(rng.uniform(*jitter.scattering)))
    if jitter.density is not None:
        streak = dataclasses.replace(streak, density=float(rng.uniform(*jitter.density)))
    if jitter.count_density is not None:
        drops = dataclasses.replace(drops, count_density=float(rng.uniform(*jitter.count_density)))
    return dataclasses.replace(template, streak=streak, drops=drops, haze=haze)


def _params_from_dict(cls, d: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ValueError(f"{cls.__name__}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in d.items():
        if isinstance(value, (list, tuple)):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


# --- config-file form ------------------------------------------------------

_SCALAR_KEYS = {
    "streak": ("attenuation", "density", "angle_mean", "angle_jitter"),
    "drops": ("count_density", "radius_log_mean", "radius_log_sigma",
              "thickness_max", "mask_threshold"),
    "haze": ("scattering",),
}
_TUPLE_KEYS = {
    "streak": ("length_range", "width_range", "intensity_range"),
    "haze": ("atmosphere_light", "ambient_light"),
    "drops": (),
}
_JITTER_KEYS = ("attenuation", "scattering", "density", "count_density")


def _parse_floats(section: str, key: str, text: str, n: int) -> tuple:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != n:
        raise ValueError(f"[{section}] {key}: expected {n} numbers, got {text!r}")
    return tuple(float(p) for p in parts)


def load_recipe(path) -> tuple[RainRecipe, RecipeJitter | None]:
    """Parse a recipe config file; returns the recipe and optional jitter."""
    parser = configparser.ConfigParser(interpolation=None)
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)

    known_sections = {"recipe", "streak", "drops", "haze", "jitter"}
    unknown = set(parser.sections()) - known_sections
    if unknown:
        raise ValueError(f"recipe file: unknown sections {sorted(unknown)}")

    seed = 0
    if parser.has_section("recipe"):
        extra = set(parser["recipe"]) - {"seed"}
        if extra:
            raise ValueError(f"recipe file: unknown keys in [recipe]: {sorted(extra)}")
        if "seed" in parser["recipe"]:
            seed = int(parser["recipe"]["seed"])

    sections: dict[str, dict] = {}
    for section in ("streak", "drops", "haze"):
        kwargs: dict = {}
        if parser.has_section(section):
            scalars, tuples = _SCALAR_KEYS[section], _TUPLE_KEYS[section]
            extra = set(parser[section]) - set(scalars) - set(tuples)
            if extra:
                raise ValueError(f"recipe file: unknown keys in [{section}]: {sorted(extra)}")
            for key in scalars:
                if key in parser[section]:
                    kwargs[key] = float(parser[section][key])
            for key in tuples:
                if key in parser[section]:
                    n = 3 if section == "haze" else 2
                    kwargs[key] = _parse_floats(section, key, parser[section][key], n)
        sections[section] = kwargs

    jitter = None
    if parser.has_section("jitter"):
        extra = set(parser["jitter"]) - set(_JITTER_KEYS)
        if extra:
            raise ValueError(f"recipe file: unknown keys in [jitter]: {sorted(extra)}")
        jkw = {key: _parse_floats("jitter", key, parser["jitter"][key], 2)
               for key in _JITTER_KEYS if key in parser["jitter"]}
        if jkw:
            jitter = RecipeJitter(**jkw)

    recipe = RainRecipe(
        streak=StreakParams(**sections["streak"]),
        drops=DropParams(**sections["drops"]),
        haze=HazeParams(**sections["haze"]),
        seed=seed,
    )
    return recipe, jitter


def save_recipe(recipe: RainRecipe, path, jitter: RecipeJitter | None = None) -> None:
    """Write a recipe (and optional jitter ranges) as a config file."""
    parser = configparser.ConfigParser(interpolation=None)
    parser["recipe"] = {"seed": str(recipe.seed)}
    for section, params in (("streak", recipe.streak), ("drops", recipe.drops),
                            ("haze", recipe.haze)):
        out = {}
        for key in _SCALAR_KEYS[section]:
            out[key] = repr(getattr(params, key))
        for key in _TUPLE_KEYS[section]:
            out[key] = ", ".join(repr(v) for v in getattr(params, key))
        parser[section] = out
    if jitter is not None and not jitter.is_empty():
        parser["jitter"] = {
            key: ", ".join(repr(v) for v in getattr(jitter, key))
            for key in _JITTER_KEYS if getattr(jitter, key) is not None
        }
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)
