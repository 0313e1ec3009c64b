"""Monte Carlo experiments for fixed density pairs.

Replication ``b`` at sweep point ``s`` draws its samples from
``SeedSequence(seed).spawn(S)[s].spawn(B)[b]``, so results depend only on the
configuration and never on how replications are spread over workers.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .densities import DensityModel, TruthOracle, parse_model, truth
from .errors import EstimationError
from .estimators import EstimatorConfig, Geometry, estimate, oracle_estimate
from .functionals import FunctionalSpec, OneSampleSpec, parse_functional
from .uncertainty import confidence_interval, variance_estimate, variance_estimate_one_sample

__all__ = [
    "ConfigError",
    "ExperimentAborted",
    "ExperimentConfig",
    "ExperimentResult",
    "ResultRow",
    "ESTIMATORS",
    "METRICS",
    "parse_config",
    "load_config",
    "run_experiment",
    "coverage_experiment",
    "normality_experiment",
    "super_oracle_experiment",
]

ESTIMATORS = {
    "naive": dict(weight_mode="unweighted", debias=False),
    "debiased": dict(weight_mode="unweighted", debias=True),
    "weighted": dict(weight_mode="general", debias=False),
    "weighted-debiased": dict(weight_mode="class", debias=True),
}
METRICS = (
    "mean",
    "bias",
    "variance",
    "mse",
    "theory",
    "mse_ratio",
    "median_ratio",
    "coverage",
    "dK",
    "dK_miscalibrated",
    "oracle_mse",
    "oracle_ratio",
    "v1hat",
    "v2hat",
    "failures",
)
FAILURE_CAP = 0.01
LOW_POWER_B = 30
# Median of a chi-square with one degree of freedom.
_CHI2_1_MEDIAN = float(stats.chi2.ppf(0.5, 1))


class ConfigError(ValueError):
    """A configuration key is unknown, missing or malformed."""


class ExperimentAborted(EstimationError):
    """More than 1% of replications failed."""


KCell = tuple[object, object]


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a density pair, a functional, an estimator and a size sweep.

    ``n`` is ``None`` for one-sample functionals and otherwise matches ``m``
    in length. ``k_cells`` lists (kX, kY) pairs, each an integer or "auto";
    kY is ``None`` for one-sample runs.
    """

    model_f: str
    functional: str
    m: tuple[int, ...]
    B: int
    model_g: str | None = None
    n: tuple[int, ...] | None = None
    estimator: str = "weighted-debiased"
    k_cells: tuple[KCell, ...] = (("auto", "auto"),)
    c: float = 0.25
    q: tuple[float, ...] = (0.05,)
    metrics: tuple[str, ...] = ("bias", "variance", "mse", "theory", "mse_ratio")
    seed: int = 0
    truth_method: str = "auto"
    truth_mc: int = 1_000_000
    miscalibration: float = 2.0
    bootstrap: int = 200

    def __post_init__(self):
        if self.B < 2:
            raise ConfigError("B must be at least 2")
        if not self.m or any(b <= a for a, b in zip(self.m, self.m[1:])):
            raise ConfigError("m must be a non-empty strictly increasing list")
        if self.n is not None:
            if len(self.n) != len(self.m):
                raise ConfigError("n must list as many sizes as m")
            if any(b <= a for a, b in zip(self.n, self.n[1:])):
                raise ConfigError("n must be strictly increasing")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator: unknown value {self.estimator!r}; choose from {', '.join(ESTIMATORS)}")
        bad = [x for x in self.metrics if x not in METRICS]
        if bad:
            raise ConfigError(f"metrics: unknown metric(s) {', '.join(bad)}")
        if not 0 < self.c < 1:
            raise ConfigError("c must lie in (0, 1)")
        if any(not 0 < q < 1 for q in self.q):
            raise ConfigError("q values must lie in (0, 1)")
        spec = self.spec()
        if isinstance(spec, OneSampleSpec) != (self.model_g is None):
            raise ConfigError("g is required for two-sample functionals and forbidden for one-sample ones")
        if (self.model_g is None) != (self.n is None):
            raise ConfigError("n is required exactly when g is given")
        self.models()

    def spec(self) -> FunctionalSpec | OneSampleSpec:
        try:
            return parse_functional(self.functional)
        except ValueError as exc:
            raise ConfigError(f"functional: {exc}") from None

    def models(self) -> tuple[DensityModel, DensityModel | None]:
        try:
            f = parse_model(self.model_f)
        except ValueError as exc:
            raise ConfigError(f"f: {exc}") from None
        try:
            g = parse_model(self.model_g) if self.model_g is not None else None
        except ValueError as exc:
            raise ConfigError(f"g: {exc}") from None
        if g is not None and g.d != f.d:
            raise ConfigError("f and g must have the same dimension")
        return f, g

    @property
    def one_sample(self) -> bool:
        return self.model_g is None

    def sizes(self) -> list[tuple[int, int | None]]:
        return list(zip(self.m, self.n)) if self.n is not None else [(m, None) for m in self.m]

    def estimator_config(self, kX, kY) -> EstimatorConfig:
        return EstimatorConfig(kX=kX, kY=kY if kY is not None else "auto", c=self.c, **ESTIMATORS[self.estimator])

    def resolve_cells(self, m: int, n: int | None) -> list[tuple[int, int | None]]:
        """(kX, kY) per cell with "auto" resolved; the variance plug-ins share these counts."""
        spec = self.spec()
        out = []
        for kx, ky in self.k_cells:
            cfg = self.estimator_config(kx, ky).resolved(m, n, spec)
            out.append((cfg.kX, cfg.kY if n is not None else None))
        return out

    def echo(self) -> list[str]:
        """key=value lines reproducing this configuration."""
        cells = ";".join(f"{a}" if b is None else f"{a}:{b}" for a, b in self.k_cells)
        lines = [
            f"f={self.model_f}",
            *([f"g={self.model_g}"] if self.model_g is not None else []),
            f"functional={self.functional}",
            f"estimator={self.estimator}",
            f"m={','.join(map(str, self.m))}",
            *([f"n={','.join(map(str, self.n))}"] if self.n is not None else []),
            f"B={self.B}",
            f"k={cells}",
            f"c={self.c:g}",
            f"q={','.join(f'{q:g}' for q in self.q)}",
            f"metrics={','.join(self.metrics)}",
            f"seed={self.seed}",
            f"truth_method={self.truth_method}",
            f"truth_mc={self.truth_mc}",
            f"miscalibration={self.miscalibration:g}",
            f"bootstrap={self.bootstrap}",
        ]
        return lines


_KEYS = {
    "f", "g", "functional", "estimator", "m", "n", "B", "k", "kX", "kY", "c", "q", "metrics",
    "seed", "truth_method", "truth_mc", "miscalibration", "bootstrap",
}


def _ints(key: str, text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated integers, got {text!r}") from None


def _k_value(key: str, t: str):
    t = t.strip()
    if t == "auto":
        return "auto"
    try:
        v = int(t)
    except ValueError:
        raise ConfigError(f"{key}: expected a positive integer or 'auto', got {t!r}") from None
    if v < 1:
        raise ConfigError(f"{key}: k must be positive, got {v}")
    return v


def _k_cells(values: dict[str, str], one_sample: bool) -> tuple[KCell, ...]:
    """``k`` lists cells ``kX:kY`` (or bare ``k``) separated by ';'; kX/kY give a grid."""
    if "k" in values and ("kX" in values or "kY" in values):
        raise ConfigError("k: use either k or kX/kY, not both")
    if "k" in values:
        cells = []
        for part in values["k"].split(";"):
            a, _, b = part.partition(":")
            kx = _k_value("k", a)
            ky = None if one_sample else (_k_value("k", b) if b else kx)
            cells.append((kx, ky))
        return tuple(cells)
    xs = [_k_value("kX", t) for t in values.get("kX", "auto").split(",")]
    if one_sample:
        if "kY" in values:
            raise ConfigError("kY: not used by one-sample functionals")
        return tuple((x, None) for x in xs)
    ys = [_k_value("kY", t) for t in values.get("kY", "auto").split(",")]
    return tuple((x, y) for x in xs for y in ys)


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = val
    for key in ("f", "functional", "m", "B"):
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")
    one_sample = "g" not in values
    m = _ints("m", values["m"])
    n = None if one_sample else (_ints("n", values["n"]) if "n" in values else m)
    try:
        kwargs = dict(
            model_f=values["f"],
            model_g=values.get("g"),
            functional=values["functional"],
            m=m,
            n=n,
            B=_ints("B", values["B"])[0],
            k_cells=_k_cells(values, one_sample),
            seed=_ints("seed", values.get("seed", "0"))[0],
        )
        if "estimator" in values:
            kwargs["estimator"] = values["estimator"]
        if "c" in values:
            kwargs["c"] = float(values["c"])
        if "q" in values:
            kwargs["q"] = tuple(float(t) for t in values["q"].split(","))
        if "metrics" in values:
            kwargs["metrics"] = tuple(t.strip() for t in values["metrics"].split(",") if t.strip())
        if "truth_method" in values:
            kwargs["truth_method"] = values["truth_method"]
        if "truth_mc" in values:
            kwargs["truth_mc"] = _ints("truth_mc", values["truth_mc"])[0]
        if "miscalibration" in values:
            kwargs["miscalibration"] = float(values["miscalibration"])
        if "bootstrap" in values:
            kwargs["bootstrap"] = _ints("bootstrap", values["bootstrap"])[0]
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


@dataclass(frozen=True)
class ResultRow:
    m: int
    n: int | None
    kX: int
    kY: int | None
    metric: str
    value: float
    se: float


@dataclass
class ExperimentResult:
    """Per-replication outputs and summary rows.

    ``estimates`` maps (m, n, kX, kY) to the estimates of the successful
    replications in index order; ``variances`` holds the matching (v1hat,
    v2hat) pairs and ``oracle`` the oracle estimates, when computed.
    """

    config: ExperimentConfig
    truth: TruthOracle
    rows: list[ResultRow] = field(default_factory=list)
    estimates: dict = field(default_factory=dict)
    variances: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    resolved_k: dict = field(default_factory=dict)

    def value(self, metric: str, m: int, kX: int | None = None, kY: int | None = None) -> float:
        return self.row(metric, m, kX, kY).value

    def row(self, metric: str, m: int, kX: int | None = None, kY: int | None = None) -> ResultRow:
        hits = [
            r for r in self.rows
            if r.metric == metric and r.m == m and (kX is None or r.kX == kX) and (kY is None or r.kY == kY)
        ]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match metric={metric} m={m} kX={kX} kY={kY}")
        return hits[0]

    def header(self) -> list[str]:
        t = self.truth
        lines = ["# " + line for line in self.config.echo()]
        lines.append(
            f"# truth: T={t.T_true!r} v1={t.v1_true!r} v2={t.v2_true!r} sigma2={t.sigma2_true!r} method={t.method}"
        )
        for (m, n), cells in self.resolved_k.items():
            lines.append(f"# resolved m={m} n={'' if n is None else n}: " + " ".join(
                f"kX={a}" + ("" if b is None else f",kY={b}")
                for a, b in cells
            ))
        lines.extend("# note: " + s for s in self.notes)
        return lines

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        if header:
            for line in self.header():
                buf.write(line + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "n", "kX", "kY", "metric", "value", "se"])
        for r in self.rows:
            w.writerow([
                r.m, "" if r.n is None else r.n, r.kX, "" if r.kY is None else r.kY,
                r.metric, repr(float(r.value)), repr(float(r.se)),
            ])
        return buf.getvalue()


def _replicate(task):
    """One replication at one sample size, evaluated at every k cell."""
    cfg, m, n, cells, seed_seq, need_var, need_oracle = task
    spec = cfg.spec()
    f, g = cfg.models()
    rng = np.random.default_rng(seed_seq)
    try:
        X = f.sample(m, rng)
        Y = g.sample(n, rng) if g is not None else None
        kx_max = max(a for a, _ in cells)
        ky_max = max(b for _, b in cells) if Y is not None else None
        geom = Geometry(X, Y, kx_max, ky_max)
        out = []
        for kx, ky in cells:
            rep = estimate(X, Y, spec, cfg.estimator_config(kx, ky), geom)
            var = (np.nan, np.nan)
            if need_var:
                vr = (
                    variance_estimate_one_sample(X, spec, kx, geom)
                    if Y is None
                    else variance_estimate(X, Y, spec, kx, ky, geom)
                )
                var = (vr.v1hat, vr.v2hat)
            out.append((rep.value, *var))
        orc = oracle_estimate(X, f, spec, g) if need_oracle else np.nan
    except EstimationError as exc:
        return None, f"{type(exc).__name__}: {exc}"
    return (np.array(out), orc), None


def _map(tasks, workers: int):
    if workers <= 1:
        return [_replicate(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_replicate, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.nan


def _bootstrap_se(stat, arrays, reps: int, seed_seq) -> float:
    if reps < 2:
        return math.nan
    rng = np.random.default_rng(seed_seq)
    size = len(arrays[0])
    vals = np.empty(reps)
    for r in range(reps):
        idx = rng.integers(0, size, size)
        vals[r] = stat(*(a[idx] for a in arrays))
    return float(np.std(vals, ddof=1))


def _summarise(cfg: ExperimentConfig, tr: TruthOracle, m, n, kx, ky, est, var, orc, boot_seed) -> list[ResultRow]:
    T = tr.T_true
    theory = tr.v1_true / m + (tr.v2_true / n if n is not None else 0.0)
    B = len(est)
    err = est - T
    rows = []
    add = lambda metric, value, se: rows.append(ResultRow(m, n, kx, ky, metric, float(value), float(se)))  # noqa: E731
    mets = cfg.metrics
    if "mean" in mets:
        add("mean", *_mean_se(est))
    if "bias" in mets:
        add("bias", *_mean_se(err))
    centred = (est - est.mean()) ** 2
    variance = float(np.mean(centred))
    if "variance" in mets:
        add("variance", variance, np.std(centred, ddof=1) / math.sqrt(B))
    mse, mse_se = _mean_se(err ** 2)
    if "mse" in mets:
        add("mse", mse, mse_se)
    if "theory" in mets:
        add("theory", theory, 0.0)
    if "mse_ratio" in mets:
        add("mse_ratio", mse / theory if theory > 0 else math.nan, mse_se / theory if theory > 0 else math.nan)
    if "median_ratio" in mets:
        stat = lambda e: np.median(e ** 2) / (theory * _CHI2_1_MEDIAN)  # noqa: E731
        add("median_ratio", stat(err) if theory > 0 else math.nan,
            _bootstrap_se(stat, [err], cfg.bootstrap, boot_seed) if theory > 0 else math.nan)
    if "coverage" in mets:
        for q in cfg.q:
            hits = np.array([
                confidence_interval(t, _VR(v1, v2), m, n, q).contains(T) for t, (v1, v2) in zip(est, var)
            ], dtype=float)
            p = hits.mean()
            rows.append(ResultRow(m, n, kx, ky, f"coverage@{q:g}", float(p), math.sqrt(p * (1 - p) / B)))
    if "dK" in mets or "dK_miscalibrated" in mets:
        if theory > 0:
            z = err / math.sqrt(theory)
            if "dK" in mets:
                add("dK", stats.kstest(z, "norm").statistic, math.nan)
            if "dK_miscalibrated" in mets:
                add("dK_miscalibrated", stats.kstest(z / cfg.miscalibration, "norm").statistic, math.nan)
        else:
            for key in ("dK", "dK_miscalibrated"):
                if key in mets:
                    add(key, math.nan, math.nan)
    if "oracle_mse" in mets or "oracle_ratio" in mets:
        oerr = orc - T
        omse, omse_se = _mean_se(oerr ** 2)
        if "oracle_mse" in mets:
            add("oracle_mse", omse, omse_se)
        if "oracle_ratio" in mets:
            stat = lambda a, b: np.mean(a ** 2) / np.mean(b ** 2)  # noqa: E731
            if omse > 0:
                add("oracle_ratio", mse / omse, _bootstrap_se(stat, [err, oerr], cfg.bootstrap, boot_seed))
            else:
                add("oracle_ratio", math.nan, math.nan)
    if "v1hat" in mets:
        add("v1hat", float(np.median(var[:, 0])), math.nan)
    if "v2hat" in mets and n is not None:
        add("v2hat", float(np.median(var[:, 1])), math.nan)
    return rows


@dataclass(frozen=True)
class _VR:
    v1hat: float
    v2hat: float


def run_experiment(cfg: ExperimentConfig, workers: int = 1, truth_oracle: TruthOracle | None = None) -> ExperimentResult:
    """Run every sweep point and summarise each (m, n, kX, kY) cell.

    Replications that raise an estimation error are dropped and counted; more
    than 1% failures at any sweep point aborts the run.
    """
    spec = cfg.spec()
    f, g = cfg.models()
    tr = truth_oracle or truth(f, g, spec, method=cfg.truth_method, n_mc=cfg.truth_mc, seed=cfg.seed)
    need_var = "coverage" in cfg.metrics or "v1hat" in cfg.metrics or "v2hat" in cfg.metrics
    need_oracle = "oracle_mse" in cfg.metrics or "oracle_ratio" in cfg.metrics
    sizes = cfg.sizes()
    root = np.random.SeedSequence(cfg.seed)
    point_seeds = root.spawn(len(sizes))
    res = ExperimentResult(cfg, tr)
    for (m, n), ss in zip(sizes, point_seeds):
        cells = cfg.resolve_cells(m, n)
        res.resolved_k[(m, n)] = cells
        rep_seeds = ss.spawn(cfg.B + 1)
        tasks = [(cfg, m, n, cells, s, need_var, need_oracle) for s in rep_seeds[: cfg.B]]
        outputs = _map(tasks, workers)
        good = [o for o, _ in outputs if o is not None]
        errs = [e for o, e in outputs if o is None]
        res.failures[(m, n)] = len(errs)
        if len(errs) > FAILURE_CAP * cfg.B:
            raise ExperimentAborted(
                f"m={m} n={n}: {len(errs)} of {cfg.B} replications failed (cap {FAILURE_CAP:.0%}); first: {errs[0]}"
            )
        if len(good) < 2:
            raise ExperimentAborted(f"m={m} n={n}: fewer than two successful replications")
        vals = np.stack([o[0] for o in good])
        orc = np.array([o[1] for o in good])
        for c, (kx, ky) in enumerate(cells):
            key = (m, n, kx, ky)
            if key in res.estimates:
                continue
            est = vals[:, c, 0]
            var = vals[:, c, 1:]
            res.estimates[key] = est
            if need_var:
                res.variances[key] = var
            if need_oracle:
                res.oracle[key] = orc
            res.rows.extend(_summarise(cfg, tr, m, n, kx, ky, est, var, orc, rep_seeds[cfg.B]))
            if "failures" in cfg.metrics:
                res.rows.append(ResultRow(m, n, kx, ky, "failures", float(len(errs)), 0.0))
        if errs:
            res.notes.append(f"m={m}: {len(errs)} failed replication(s); first: {errs[0]}")
    if cfg.B < LOW_POWER_B and ("dK" in cfg.metrics or "dK_miscalibrated" in cfg.metrics):
        res.notes.append(f"low power: Kolmogorov distance from only B={cfg.B} replications")
    return res


def _with_metrics(cfg: ExperimentConfig, extra: tuple[str, ...], **changes) -> ExperimentConfig:
    metrics = tuple(dict.fromkeys(cfg.metrics + extra))
    return replace(cfg, metrics=metrics, **changes)


def coverage_experiment(cfg: ExperimentConfig, workers: int = 1, q: tuple[float, ...] | None = None) -> ExperimentResult:
    """Fraction of replications whose level 1-q interval contains T, per q."""
    return run_experiment(_with_metrics(cfg, ("coverage", "v1hat", "v2hat"), **({"q": tuple(q)} if q else {})), workers)


def normality_experiment(cfg: ExperimentConfig, workers: int = 1, miscalibration: float | None = None) -> ExperimentResult:
    """Kolmogorov distance of (T_hat - T) / (v1/m + v2/n)^(1/2) to N(0, 1), plus a miscalibrated control."""
    changes = {} if miscalibration is None else {"miscalibration": float(miscalibration)}
    return run_experiment(_with_metrics(cfg, ("dK", "dK_miscalibrated"), **changes), workers)


def super_oracle_experiment(
    kappa: float,
    model_f: str,
    m_sweep,
    B: int,
    seed: int = 0,
    k="auto",
    workers: int = 1,
) -> ExperimentResult:
    """MSE of the debiased Renyi-class weighted estimator of int f^kappa over that of the oracle mean of f(X_i)^(kappa-1)."""
    if not 0.5 < kappa < 1.0:
        raise ValueError(f"kappa must lie in (1/2, 1), got {kappa}")
    cfg = ExperimentConfig(
        model_f=model_f,
        functional=f"renyi-entropy:{kappa!r}",
        m=tuple(int(x) for x in m_sweep),
        B=B,
        estimator="weighted-debiased",
        k_cells=((k, None),),
        metrics=("bias", "variance", "mse", "theory", "oracle_mse", "oracle_ratio"),
        seed=seed,
    )
    return run_experiment(cfg, workers)
