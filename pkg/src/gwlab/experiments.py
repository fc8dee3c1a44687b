from __future__ import annotations

import logging
import math
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import repeat

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_digest
from .ensemble import SampleSpec, WignerSample, sample, sample_rng
from .errors import ConfigError, GwlabError, InsufficientSizes
from .eth_stats import bridge_points, bridge_ratio, eth_max, eth_pair_max, lambda_k, window_width, xi
from .observables import Observable, ObservableFamily, build_hierarchy, observable_from_json, traceless
from .predictions import envelope, predict_two_resolvent
from .report import Provenance, Record, RunResult
from .resolvent_traces import (
    ResolventSpec,
    identity_residual_fundga,
    identity_residual_splitting,
    local_law_statistic,
    overlap,
    renormalized_wga,
    trace_ga,
    trace_two,
)
from .spectral import (
    ClassicalLocations,
    SpectralDecomposition,
    classical_locations,
    decompose,
    pair_control,
    rigidity_excess,
)
from .variance_profile import SqrtProfile, VarianceProfile, random_mix_profile, sqrt_profile, stability_radius

logger = logging.getLogger(__name__)

NEEDS_SQRT = frozenset({"identities", "xi_boundedness"})
WINDOW_ELL_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class StudyContext:
    config: ExperimentConfig
    n: int
    profile: VarianceProfile
    observables: tuple[Observable, ...]
    sq: SqrtProfile | None = None
    families: tuple[ObservableFamily, ...] = ()
    gammas: ClassicalLocations | None = None
    z_values: tuple[complex, ...] = ()


@dataclass(frozen=True)
class SampleOutcome:
    n: int
    sample_index: int
    values: dict[str, float]
    error: str = ""


def z_label(z: complex) -> str:
    sign = "+" if z.imag >= 0 else "-"
    return f"{z.real:g}{sign}{abs(z.imag):g}i"


def _unique_labels(observables: list[Observable]) -> tuple[Observable, ...]:
    labels = [obs.label for obs in observables]
    if len(set(labels)) == len(labels):
        return tuple(observables)
    return tuple(replace(obs, label=f"{obs.label}#{index}") for index, obs in enumerate(observables))


def prepare(config: ExperimentConfig, n: int) -> StudyContext:
    """Build everything a study needs at one size that does not depend on the sample.

    Args:
        config: Validated experiment config.
        n: Matrix dimension.

    Returns:
        Shared, read-only context passed to every sample evaluation.
    """
    profile = config.profile.build(n)
    wants_level0 = any(
        (raw == "level0") or (isinstance(raw, dict) and raw.get("kind") == "level0") for raw in config.observables
    )
    sq = None
    if config.study in NEEDS_SQRT or wants_level0:
        sq = sqrt_profile(profile, strict=False)
    root = sq if sq is not None and sq.assumption_holds else None
    observables = _unique_labels(
        [observable_from_json(raw, n, sq=root, seed=config.seed) for raw in config.observables]
    )

    families: tuple[ObservableFamily, ...] = ()
    if config.study == "xi_boundedness":
        families = tuple(
            build_hierarchy(sq, observables[0], depth=config.level, max_members=config.max_members, seed=config.seed)
        )

    z_values = config.z_grid
    if config.study == "local_law" and config.eta_exponent is not None and config.energies:
        eta = float(n) ** (-config.eta_exponent)
        z_values = tuple(complex(energy, eta) for energy in config.energies)

    gammas = classical_locations(n) if config.study == "rigidity" else None
    return StudyContext(
        config=config,
        n=n,
        profile=profile,
        observables=observables,
        sq=sq,
        families=families,
        gammas=gammas,
        z_values=z_values,
    )


def _draw(ctx: StudyContext, sample_index: int) -> tuple[WignerSample, SpectralDecomposition]:
    spec = SampleSpec(profile=ctx.profile, law=ctx.config.law, seed=ctx.config.seed, sample_index=sample_index)
    drawn = sample(spec)
    return drawn, decompose(drawn)


def _eth_scaling(ctx: StudyContext, sample_index: int) -> dict[str, float]:
    _, decomp = _draw(ctx, sample_index)
    values: dict[str, float] = {}
    for obs in ctx.observables:
        statistic = eth_max(overlap(decomp, obs), obs.mean)
        values[f"eth_max[{obs.label}]"] = statistic
        values[f"eth_pair_max[{obs.label}]"] = eth_pair_max(decomp, obs)
        values[f"sqrtN_eth_max[{obs.label}]"] = math.sqrt(ctx.n) * statistic
    return values


def _local_law(ctx: StudyContext, sample_index: int) -> dict[str, float]:
    _, decomp = _draw(ctx, sample_index)
    by_energy = ctx.config.eta_exponent is not None and bool(ctx.config.energies)
    values: dict[str, float] = {}
    for z in ctx.z_values:
        label = f"local_law[E={z.real:g}]" if by_energy else f"local_law[z={z_label(z)}]"
        values[label] = local_law_statistic(decomp, z) / envelope("local_law", ctx.n, z=z)
    return values


def _rigidity(ctx: StudyContext, sample_index: int) -> dict[str, float]:
    _, decomp = _draw(ctx, sample_index)
    return {"rigidity_excess": rigidity_excess(decomp, ctx.gammas)}


def _two_resolvent(ctx: StudyContext, sample_index: int) -> dict[str, float]:
    _, decomp = _draw(ctx, sample_index)
    r1, r2 = (ResolventSpec(z) for z in ctx.z_values)
    values: dict[str, float] = {}
    for obs in ctx.observables:
        value = trace_two(decomp, obs, obs, r1, r2)
        values[f"trace_re[{obs.label}]"] = value.real
        values[f"trace_im[{obs.label}]"] = value.imag
    return values


def _renorm_zero_mean(ctx: StudyContext, sample_index: int) -> dict[str, float]:
    drawn, decomp = _draw(ctx, sample_index)
    values: dict[str, float] = {}
    for obs in ctx.observables:
        for z in ctx.z_values:
            value = renormalized_wga(drawn, decomp, obs, z).value
            values[f"renorm_re[{obs.label},z={z_label(z)}]"] = value.real
            values[f"renorm_im[{obs.label},z={z_label(z)}]"] = value.imag
    return values


def _xi_boundedness(ctx: StudyContext, sample_index: int) -> dict[str, float]:
    _, decomp = _draw(ctx, sample_index)
    j_width = window_width(ctx.n, ctx.config.j_exponent)
    m = ctx.observables[0]
    estimate = lambda_k(decomp, ctx.families, j_width)
    return {
        f"xi[{m.label}]": xi(overlap(decomp, traceless(m)), j_width).value,
        f"xi_bar[{m.label}]": xi(overlap(decomp, m, conjugated=True), j_width).value,
        f"lambda_{estimate.k}": estimate.value,
    }


def _bridge(ctx: StudyContext, sample_index: int) -> dict[str, float]:
    _, decomp = _draw(ctx, sample_index)
    j_width = window_width(ctx.n, ctx.config.j_exponent)
    center = (ctx.n + 1) // 2
    ell, _ = pair_control(*bridge_points(ctx.n, center, center, j_width))
    values: dict[str, float] = {"bridge_ell": ell / j_width}
    for obs in ctx.observables:
        values[f"bridge[{obs.label}]"] = bridge_ratio(decomp, obs, center, center, j_width)
        values[f"bridge_bar[{obs.label}]"] = bridge_ratio(decomp, obs, center, center, j_width, conjugated=True)
    return values


def _xi_sweep(ctx: StudyContext, sample_index: int) -> dict[str, float]:
    _, decomp = _draw(ctx, sample_index)
    values: dict[str, float] = {}
    for obs in ctx.observables:
        plain = overlap(decomp, traceless(obs))
        conjugated = overlap(decomp, obs, conjugated=True)
        for exponent in ctx.config.j_exponents:
            j_width = window_width(ctx.n, exponent)
            values[f"xi[{obs.label},J=N^{exponent:g}]"] = xi(plain, j_width).value
            values[f"xi_bar[{obs.label},J=N^{exponent:g}]"] = xi(conjugated, j_width).value
    return values


def _stability(ctx: StudyContext, sample_index: int) -> dict[str, float]:
    profile = random_mix_profile(ctx.n, sample_rng(ctx.config.seed, sample_index))
    op = stability_radius(profile)
    return {"stability_margin": op.radius_bound - op.spectral_radius}


def _identities(ctx: StudyContext, sample_index: int) -> dict[str, float]:
    drawn, decomp = _draw(ctx, sample_index)
    values: dict[str, float] = {}
    for obs in ctx.observables:
        for z in ctx.z_values:
            scale = 1.0 + abs(trace_ga(decomp, obs, z))
            suffix = f"[{obs.label},z={z_label(z)}]"
            values[f"fundga{suffix}"] = identity_residual_fundga(drawn, decomp, obs, z) / scale
            values[f"splitting{suffix}"] = identity_residual_splitting(drawn, decomp, obs, z, ctx.sq) / scale
    return values


STUDY_EVALUATORS: dict[str, Callable[[StudyContext, int], dict[str, float]]] = {
    "eth_scaling": _eth_scaling,
    "local_law": _local_law,
    "rigidity": _rigidity,
    "two_resolvent": _two_resolvent,
    "renorm_zero_mean": _renorm_zero_mean,
    "xi_boundedness": _xi_boundedness,
    "bridge": _bridge,
    "xi_sweep": _xi_sweep,
    "stability": _stability,
    "identities": _identities,
}


def evaluate_sample(ctx: StudyContext, sample_index: int) -> SampleOutcome:
    """Run the study statistics on one sample, capturing library errors."""
    try:
        values = STUDY_EVALUATORS[ctx.config.study](ctx, sample_index)
    except GwlabError as exc:
        logger.warning("N=%d sample %d failed: %s", ctx.n, sample_index, exc)
        return SampleOutcome(ctx.n, sample_index, {}, error=f"{type(exc).__name__}: {exc}")
    logger.debug("N=%d sample %d done", ctx.n, sample_index)
    return SampleOutcome(ctx.n, sample_index, values)


def _summary(values: np.ndarray) -> tuple[float, float, float, float, float]:
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else float("nan")
    p50, p90, p99 = (float(v) for v in np.percentile(values, [50, 90, 99]))
    return mean, stderr, p50, p90, p99


def _judge(ctx: StudyContext, statistic: str, values: np.ndarray, mean: float, stderr: float) -> tuple[float, bool]:
    """Envelope value and pass flag for one aggregated statistic."""
    bands = ctx.config.bands
    n = ctx.n
    median = float(np.median(values))
    if statistic.startswith("sqrtN_eth_max"):
        return bands.eth_median_cap, median <= bands.eth_median_cap
    if statistic.startswith("eth_max"):
        bound = bands.eth_median_cap * envelope("eth", n, xi=0.0)
        return bound, median <= bound
    if statistic.startswith("eth_pair_max"):
        bound = 2.0 * bands.eth_median_cap * envelope("eth", n, xi=0.0)
        return bound, median <= bound
    if statistic.startswith(("local_law", "rigidity_excess")):
        bound = bands.log_factor * math.log(n)
        return bound, float(np.percentile(values, 99)) <= bound
    if statistic.startswith("renorm_"):
        bound = bands.zero_mean_sigmas * stderr
        return bound, abs(mean) <= bound
    if statistic.startswith("xi"):
        return bands.xi_cap, float(values.max()) <= bands.xi_cap
    if statistic.startswith("lambda_"):
        return bands.lambda_cap, float(values.max()) <= bands.lambda_cap
    if statistic.startswith("bridge_ell"):
        worst = float(np.max(np.abs(values - 1.0)))
        return WINDOW_ELL_TOLERANCE, worst <= WINDOW_ELL_TOLERANCE
    if statistic.startswith("bridge"):
        ok = float(values.min()) >= bands.bridge_low and float(values.max()) <= bands.bridge_high
        return bands.bridge_high, ok
    if statistic.startswith("stability_margin"):
        return -bands.stability_tolerance, float(values.min()) >= -bands.stability_tolerance
    if statistic.startswith(("fundga", "splitting")):
        return bands.identity_tolerance, float(values.max()) <= bands.identity_tolerance
    if statistic.startswith("trace_"):
        return float("nan"), True
    raise ValueError(f"No pass rule for statistic {statistic!r}.")


def _two_resolvent_records(ctx: StudyContext, records: list[Record]) -> list[Record]:
    """Compare the complex Monte Carlo mean of <G1 A G2 A> with both prediction kernels."""
    by_name = {record.statistic: record for record in records}
    z1, z2 = ctx.z_values
    extra: list[Record] = []
    for obs in ctx.observables:
        re = by_name.get(f"trace_re[{obs.label}]")
        im = by_name.get(f"trace_im[{obs.label}]")
        if re is None or im is None:
            continue
        empirical = complex(re.mean, im.mean)
        stderr = math.hypot(re.stderr, im.stderr)
        for kernel in ("printed", "self_consistent"):
            predicted = predict_two_resolvent(ctx.profile, obs, obs, z1, z2, kernel=kernel).total
            residual = abs(empirical - predicted)
            bound = max(ctx.config.bands.zero_mean_sigmas * stderr, ctx.config.bands.prediction_relative * abs(predicted))
            name = "residual" if kernel == ctx.config.kernel else f"residual_{kernel}"
            extra.append(
                Record(
                    study=ctx.config.study,
                    n=ctx.n,
                    statistic=f"{name}[{obs.label}]",
                    mean=residual,
                    stderr=stderr,
                    p50=residual,
                    p90=residual,
                    p99=residual,
                    envelope=bound,
                    passed=residual <= bound and not (re.failed or im.failed),
                    failed=re.failed or im.failed,
                    error=re.error or im.error,
                )
            )
    return extra


def _failed_record(study: str, n: int, statistic: str, error: str) -> Record:
    nan = float("nan")
    return Record(study, n, statistic, nan, nan, nan, nan, nan, nan, passed=False, failed=True, error=error)


def aggregate(ctx: StudyContext, outcomes: list[SampleOutcome]) -> list[Record]:
    """Reduce per-sample outcomes at one size into records, in statistic order.

    Samples that raised are excluded from the statistics; every record of the
    size is then marked failed with the first error.
    """
    study = ctx.config.study
    failures = [outcome for outcome in outcomes if outcome.error]
    succeeded = [outcome for outcome in outcomes if not outcome.error]
    error = failures[0].error if failures else ""
    if not succeeded:
        return [_failed_record(study, ctx.n, "samples", error)]

    names: list[str] = []
    for outcome in succeeded:
        names.extend(name for name in outcome.values if name not in names)

    records: list[Record] = []
    for name in names:
        values = np.asarray([o.values[name] for o in succeeded if name in o.values], dtype=np.float64)
        mean, stderr, p50, p90, p99 = _summary(values)
        bound, passed = _judge(ctx, name, values, mean, stderr)
        records.append(
            Record(
                study=study,
                n=ctx.n,
                statistic=name,
                mean=mean,
                stderr=stderr,
                p50=p50,
                p90=p90,
                p99=p99,
                envelope=bound,
                passed=passed and not failures,
                failed=bool(failures),
                error=error,
            )
        )
    if study == "two_resolvent":
        records.extend(_two_resolvent_records(ctx, records))
    return sorted(records, key=lambda record: record.statistic)


def fit_scaling_exponent(result: RunResult, statistic: str) -> float:
    """Least-squares slope of log(median statistic) against log N.

    Args:
        result: Run result holding one record per size for `statistic`.
        statistic: Statistic name.

    Returns:
        Fitted exponent.

    Raises:
        InsufficientSizes: If fewer than three sizes carry the statistic.
        ValueError: If a median is not positive.
    """
    medians = {record.n: record.p50 for record in result.records if record.statistic == statistic}
    if len(medians) < 3:
        raise InsufficientSizes(f"Scaling fit of {statistic!r} needs at least 3 sizes, got {len(medians)}.")
    sizes = np.asarray(sorted(medians), dtype=np.float64)
    values = np.asarray([medians[int(n)] for n in sizes], dtype=np.float64)
    if np.any(~np.isfinite(values)) or np.any(values <= 0.0):
        raise ValueError(f"Scaling fit of {statistic!r} needs positive finite medians, got {values.tolist()}.")
    slope, _ = np.polyfit(np.log(sizes), np.log(values), 1)
    return float(slope)


def _cross_size_records(config: ExperimentConfig, contexts: dict[int, StudyContext], records: list[Record]) -> list[Record]:
    """Slope fit for eth_scaling and residual decay for two_resolvent."""
    partial = RunResult(study=config.study, records=tuple(records))
    top = max(config.sizes)
    if top not in contexts:
        return []
    extra: list[Record] = []
    if config.study == "eth_scaling" and len(config.sizes) >= 3:
        for obs in contexts[top].observables:
            statistic = f"eth_max[{obs.label}]"
            try:
                slope = fit_scaling_exponent(partial, statistic)
            except (InsufficientSizes, ValueError) as exc:
                extra.append(_failed_record(config.study, top, f"eth_slope[{obs.label}]", str(exc)))
                continue
            ok = config.bands.slope_low <= slope <= config.bands.slope_high
            extra.append(
                Record(config.study, top, f"eth_slope[{obs.label}]", slope, 0.0, slope, slope, slope,
                       config.bands.slope_high, passed=ok)
            )
    if config.study == "two_resolvent" and len(config.sizes) >= 2:
        low = min(config.sizes)
        for obs in contexts[top].observables:
            name = f"residual[{obs.label}]"
            first = next((r for r in records if r.n == low and r.statistic == name), None)
            last = next((r for r in records if r.n == top and r.statistic == name), None)
            if first is None or last is None or first.mean == 0.0:
                continue
            ratio = last.mean / first.mean
            extra.append(
                Record(config.study, top, f"residual_decay[{obs.label}]", ratio, 0.0, ratio, ratio, ratio, 1.0,
                       passed=ratio < 1.0)
            )
    return extra


def run(config: ExperimentConfig, workers: int = 1) -> RunResult:
    """Run a study over every configured size.

    Samples are evaluated in a process pool when `workers > 1`; results are
    always reduced in sample-index order, so output is identical at any
    worker count.

    Args:
        config: Validated experiment config.
        workers: Number of worker processes.

    Returns:
        Aggregated records ordered by (N, statistic) plus provenance.
    """
    if workers < 1:
        raise ValueError(f"workers must be at least 1, got {workers}.")
    logger.info("Study %s: sizes %s, %d samples each, seed %d", config.study, list(config.sizes), config.samples_per_size, config.seed)
    indices = range(config.samples_per_size)
    records: list[Record] = []
    contexts: dict[int, StudyContext] = {}

    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for n in config.sizes:
            try:
                ctx = prepare(config, n)
            except ConfigError:
                raise
            except GwlabError as exc:
                error = f"{type(exc).__name__}: {exc}"
                logger.warning("N=%d: setup failed: %s", n, error)
                records.append(_failed_record(config.study, n, "setup", error))
                continue
            contexts[n] = ctx
            if executor is None:
                outcomes = [evaluate_sample(ctx, index) for index in indices]
            else:
                chunk = max(1, config.samples_per_size // (4 * workers))
                outcomes = list(executor.map(evaluate_sample, repeat(ctx), indices, chunksize=chunk))
            size_records = aggregate(ctx, outcomes)
            records.extend(size_records)
            logger.info("N=%d: %d records, %d failed samples", n, len(size_records), sum(1 for o in outcomes if o.error))
    finally:
        if executor is not None:
            executor.shutdown()

    records.extend(_cross_size_records(config, contexts, records))
    records.sort(key=lambda record: (record.n, record.statistic))
    provenance = Provenance(config_hash=config_digest(config), seed=config.seed, code_version=__version__)
    return RunResult(study=config.study, records=tuple(records), provenance=provenance)
