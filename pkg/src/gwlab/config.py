from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Literal

from .ensemble import DEFAULT_LAW, ENTRY_LAWS, EntryLaw
from .errors import ConfigError
from .predictions import KERNELS, Kernel
from .variance_profile import PROFILE_KINDS, VarianceProfile, profile_from_json

Study = Literal[
    "eth_scaling",
    "local_law",
    "rigidity",
    "two_resolvent",
    "renorm_zero_mean",
    "xi_boundedness",
    "bridge",
    "xi_sweep",
    "stability",
    "identities",
]
STUDIES: tuple[Study, ...] = (
    "eth_scaling",
    "local_law",
    "rigidity",
    "two_resolvent",
    "renorm_zero_mean",
    "xi_boundedness",
    "bridge",
    "xi_sweep",
    "stability",
    "identities",
)
Z_STUDIES = frozenset({"two_resolvent", "renorm_zero_mean", "identities"})
J_STUDIES = frozenset({"xi_boundedness", "bridge"})
OutputFormat = Literal["csv", "json"]


@dataclass(frozen=True)
class ProfileSpec:
    kind: str = "flat"
    beta: float | None = None
    entries: tuple[float, ...] | None = None

    def build(self, n: int) -> VarianceProfile:
        """Materialize the profile at dimension `n`."""
        payload: dict[str, Any] = {"n": n, "kind": self.kind}
        if self.beta is not None:
            payload["beta"] = self.beta
        if self.entries is not None:
            payload["entries"] = list(self.entries)
        return profile_from_json(payload)


@dataclass(frozen=True)
class Bands:
    eth_median_cap: float = 30.0
    slope_low: float = -0.62
    slope_high: float = -0.38
    log_factor: float = 10.0
    zero_mean_sigmas: float = 4.0
    prediction_relative: float = 0.1
    xi_cap: float = 50.0
    lambda_cap: float = 50.0
    bridge_low: float = 0.01
    bridge_high: float = 100.0
    identity_tolerance: float = 1e-9
    stability_tolerance: float = 1e-8


@dataclass(frozen=True)
class ExperimentConfig:
    study: Study
    profile: ProfileSpec = field(default_factory=ProfileSpec)
    law: EntryLaw = DEFAULT_LAW
    sizes: tuple[int, ...] = (64,)
    samples_per_size: int = 10
    j_exponent: float | None = None
    j_exponents: tuple[float, ...] = (0.2, 0.4, 0.6)
    z_grid: tuple[complex, ...] = ()
    energies: tuple[float, ...] = ()
    eta_exponent: float | None = None
    observables: tuple[Any, ...] = ("alternating",)
    level: int = 1
    max_members: int = 64
    kernel: Kernel = "printed"
    seed: int = 0
    output_path: Path | None = None
    output_format: OutputFormat = "csv"
    bands: Bands = field(default_factory=Bands)


def parse_complex(value: Any, where: str) -> complex:
    """Parse `[re, im]`, `{"re", "im"}` or a Python-style complex string.

    Raises:
        ConfigError: If the value is malformed or lies on the real axis.
    """
    try:
        if isinstance(value, list) and len(value) == 2:
            z = complex(float(value[0]), float(value[1]))
        elif isinstance(value, dict):
            z = complex(float(value.get("re", 0.0)), float(value["im"]))
        elif isinstance(value, str):
            z = complex(value.replace(" ", "").replace("i", "j"))
        else:
            raise TypeError(type(value).__name__)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"Invalid complex value {value!r} in {where} ({exc}).") from exc
    if z.imag == 0.0:
        raise ConfigError(f"Spectral parameter {value!r} in {where} must have Im z != 0.")
    return z


def _require_int(payload: dict[str, Any], key: str, source: str, default: int, minimum: int) -> int:
    value = payload.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"Expected integer '{key}' in {source}, got {value!r}.")
    if value < minimum:
        raise ConfigError(f"'{key}' must be at least {minimum} in {source}, got {value}.")
    return value


def _optional_exponent(payload: dict[str, Any], key: str, source: str) -> float | None:
    value = payload.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"Expected number '{key}' in {source}, got {value!r}.")
    if not 0.0 < float(value) < 1.0:
        raise ConfigError(f"'{key}' must satisfy 0 < {key} < 1 in {source}, got {value}.")
    return float(value)


def _parse_profile(raw: Any, source: str) -> ProfileSpec:
    if raw is None:
        return ProfileSpec()
    if isinstance(raw, str):
        raw = {"kind": raw}
    if not isinstance(raw, dict):
        raise ConfigError(f"Expected 'profile' object in {source}.")
    kind = raw.get("kind", "flat")
    if kind not in PROFILE_KINDS:
        raise ConfigError(f"Profile 'kind' must be one of {', '.join(PROFILE_KINDS)} in {source}, got {kind!r}.")
    beta = raw.get("beta")
    if kind in ("cosine", "sinkhorn"):
        if isinstance(beta, bool) or not isinstance(beta, (int, float)) or not 0.0 <= float(beta) < 1.0:
            raise ConfigError(f"{kind.capitalize()} profile needs 'beta' in [0, 1) in {source}, got {beta!r}.")
        beta = float(beta)
    else:
        beta = None
    entries = raw.get("entries")
    if kind == "explicit":
        if not isinstance(entries, list):
            raise ConfigError(f"Explicit profile needs row-major 'entries' in {source}.")
        entries = tuple(float(value) for value in entries)
    else:
        entries = None
    return ProfileSpec(kind=kind, beta=beta, entries=entries)


def _parse_bands(raw: Any, source: str) -> Bands:
    if raw is None:
        return Bands()
    if not isinstance(raw, dict):
        raise ConfigError(f"Expected 'bands' object in {source}.")
    known = set(Bands.__dataclass_fields__)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"Unknown band(s) {', '.join(unknown)} in {source}.")
    values: dict[str, float] = {}
    for key, value in raw.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"Band '{key}' must be numeric in {source}, got {value!r}.")
        values[key] = float(value)
    return Bands(**values)


def config_from_dict(payload: Any, source: str = "<config>") -> ExperimentConfig:
    """Validate a decoded JSON payload and build the experiment config.

    Args:
        payload: Decoded JSON object.
        source: Label used in error messages, usually the file path.

    Returns:
        Validated configuration.

    Raises:
        ConfigError: If any field is missing, malformed or out of range.
    """
    if not isinstance(payload, dict):
        raise ConfigError(f"Expected top-level object in {source}.")

    study = payload.get("study")
    if study not in STUDIES:
        raise ConfigError(f"'study' must be one of {', '.join(STUDIES)} in {source}, got {study!r}.")

    law = payload.get("law", DEFAULT_LAW)
    if law not in ENTRY_LAWS:
        raise ConfigError(f"'law' must be one of {', '.join(ENTRY_LAWS)} in {source}, got {law!r}.")

    raw_sizes = payload.get("sizes", [64])
    if not isinstance(raw_sizes, list) or not raw_sizes:
        raise ConfigError(f"Expected non-empty 'sizes' array in {source}.")
    sizes: list[int] = []
    for index, value in enumerate(raw_sizes, start=1):
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ConfigError(f"Size #{index} must be a positive integer in {source}, got {value!r}.")
        sizes.append(value)
    if any(later <= earlier for earlier, later in zip(sizes, sizes[1:])):
        raise ConfigError(f"'sizes' must be strictly ascending in {source}, got {sizes}.")

    samples = _require_int(payload, "samples_per_size", source, default=10, minimum=2)
    seed = _require_int(payload, "seed", source, default=0, minimum=0)
    level = _require_int(payload, "level", source, default=1, minimum=0)
    max_members = _require_int(payload, "max_members", source, default=64, minimum=1)

    raw_z = payload.get("z_grid", [])
    if not isinstance(raw_z, list):
        raise ConfigError(f"Expected 'z_grid' array in {source}.")
    z_grid = tuple(parse_complex(value, f"{source} z_grid[{index}]") for index, value in enumerate(raw_z))

    raw_energies = payload.get("energies", [])
    if not isinstance(raw_energies, list) or any(
        isinstance(value, bool) or not isinstance(value, (int, float)) for value in raw_energies
    ):
        raise ConfigError(f"Expected numeric 'energies' array in {source}.")
    energies = tuple(float(value) for value in raw_energies)

    j_exponent = _optional_exponent(payload, "j_exponent", source)
    eta_exponent = _optional_exponent(payload, "eta_exponent", source)
    raw_exponents = payload.get("j_exponents", [0.2, 0.4, 0.6])
    if not isinstance(raw_exponents, list) or not raw_exponents:
        raise ConfigError(f"Expected non-empty 'j_exponents' array in {source}.")
    j_exponents = tuple(
        _optional_exponent({"j_exponents": value}, "j_exponents", source) for value in raw_exponents
    )
    if None in j_exponents:
        raise ConfigError(f"'j_exponents' entries must be numbers in {source}.")

    raw_observables = payload.get("observables", payload.get("observable", "alternating"))
    if not isinstance(raw_observables, list):
        raw_observables = [raw_observables]
    if not raw_observables:
        raise ConfigError(f"Expected at least one observable in {source}.")

    kernel = payload.get("kernel", "printed")
    if kernel not in KERNELS:
        raise ConfigError(f"'kernel' must be one of {', '.join(KERNELS)} in {source}, got {kernel!r}.")

    output_format = payload.get("format", "csv")
    if output_format not in ("csv", "json"):
        raise ConfigError(f"'format' must be csv or json in {source}, got {output_format!r}.")
    raw_output = payload.get("output_path")
    if raw_output is not None and not isinstance(raw_output, str):
        raise ConfigError(f"'output_path' must be a string in {source}.")

    if study in Z_STUDIES and not z_grid:
        raise ConfigError(f"Study '{study}' needs a non-empty 'z_grid' in {source}.")
    if study == "two_resolvent" and len(z_grid) != 2:
        raise ConfigError(f"Study 'two_resolvent' needs exactly two z values (z1, z2) in {source}.")
    if study == "local_law" and not z_grid and not (energies and eta_exponent is not None):
        raise ConfigError(f"Study 'local_law' needs 'z_grid' or 'energies' with 'eta_exponent' in {source}.")
    if study == "local_law":
        for index, z in enumerate(z_grid):
            if z.imag <= 0.0:
                raise ConfigError(f"Study 'local_law' needs Im z > 0 at {source} z_grid[{index}].")
    if study in J_STUDIES and j_exponent is None:
        raise ConfigError(f"Study '{study}' needs 'j_exponent' with 0 < j_exponent < 1 in {source}.")

    return ExperimentConfig(
        study=study,
        profile=_parse_profile(payload.get("profile"), source),
        law=law,
        sizes=tuple(sizes),
        samples_per_size=samples,
        j_exponent=j_exponent,
        j_exponents=j_exponents,
        z_grid=z_grid,
        energies=energies,
        eta_exponent=eta_exponent,
        observables=tuple(raw_observables),
        level=level,
        max_members=max_members,
        kernel=kernel,
        seed=seed,
        output_path=Path(raw_output) if raw_output else None,
        output_format=output_format,
        bands=_parse_bands(payload.get("bands"), source),
    )


def load_config(path: Path) -> ExperimentConfig:
    """Load and validate an experiment config from a JSON file.

    Raises:
        ConfigError: If the file cannot be read or fails validation.
    """
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"Could not read config file: {path} ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Invalid JSON file: {path} ({exc})") from exc
    return config_from_dict(payload, source=str(path))


def config_to_dict(config: ExperimentConfig) -> dict[str, Any]:
    """JSON-ready form of a config, inverse of `config_from_dict`."""
    payload = asdict(config)
    payload["z_grid"] = [[z.real, z.imag] for z in config.z_grid]
    payload["output_path"] = str(config.output_path) if config.output_path else None
    payload["format"] = payload.pop("output_format")
    payload["observables"] = list(config.observables)
    profile = {key: value for key, value in payload["profile"].items() if value is not None}
    if "entries" in profile:
        profile["entries"] = list(profile["entries"])
    payload["profile"] = profile
    for key in ("sizes", "j_exponents", "energies"):
        payload[key] = list(payload[key])
    return payload


def config_digest(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON form, excluding where results are written."""
    payload = config_to_dict(config)
    payload.pop("output_path", None)
    payload.pop("format", None)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def default_config(study: Study) -> ExperimentConfig:
    """Small desk-scale config used when `run` is called without `--config`."""
    if study not in STUDIES:
        raise ConfigError(f"Unknown study {study!r}; expected one of {', '.join(STUDIES)}.")
    payload: dict[str, Any] = {"study": study, "sizes": [32, 64, 128], "samples_per_size": 10}
    if study in Z_STUDIES:
        payload["z_grid"] = [[0.0, 1.0]]
    if study == "two_resolvent":
        payload.update(
            z_grid=[[0.3, 0.5], [0.3, -0.5]],
            profile={"kind": "cosine", "beta": 0.5},
            observables=[{"kind": "fourier"}],
        )
    if study == "local_law":
        payload.update(energies=[0.0, 1.0], eta_exponent=0.6)
    if study in J_STUDIES:
        payload["j_exponent"] = 0.3
    return config_from_dict(payload, source=f"<default {study}>")


def load_profile(path: Path) -> VarianceProfile:
    """Load a standalone profile description (`{"n", "kind", "beta", "entries"}`).

    Raises:
        ConfigError: If the file cannot be read or the description is invalid.
    """
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"Could not read profile file: {path} ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Invalid JSON file: {path} ({exc})") from exc
    try:
        return profile_from_json(payload)
    except ValueError as exc:
        raise ConfigError(f"{exc} ({path})") from exc
