"""Experiment configuration, sweeps over (kappa, seed) grids, and result files.

Results are one CSV per sweep with the columns in ``COLUMNS``; experiment
specific numbers travel in ``payload`` as sorted-key JSON.  A JSON sidecar
``<out>.json`` holds the full configuration and the code version.

Cell seeds are ``SeedSequence([master_seed, kappa_index, seed_index])``
reduced to 63 bits, so a cell's randomness never depends on which other cells
run or on the worker count (``SLOWMIX_THREADS``).
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, bounds
from .advdiff import closeness_check
from .errors import ConfigInvalid, InsufficientData, SlowmixError, UnknownKind
from .flow import n_kappa_of, realize, rescale, stream_sup_norm
from .mixmeter import dissipation_time, fit_rate, mix_records, theorem3_quantities
from .profile import PROFILES, get_profile
from .spectral import random_bandlimited
from .transport import TrigPolynomial
from .twopoint import drift_estimate, foster_lyapunov_check, minorization_probe

EXPERIMENTS = (
    "tdis", "mix", "twopoint-drift", "twopoint-minorize",
    "bounds", "closeness", "prop-check", "rescaled-tdis",
)
COLUMNS = ["experiment", "kappa", "amplitude", "seed", "status", "wall_time_s", "code_version", "payload"]
THREADS_ENV = "SLOWMIX_THREADS"


@dataclass
class ExperimentConfig:
    experiment: str
    kappa_list: list = field(default_factory=lambda: [1 / 8, 1 / 16, 1 / 32, 1 / 64])
    amplitude: float = 50.0
    profile_name: str = "cosine_bump"
    grid: int = 256
    seeds: list = field(default_factory=lambda: list(range(8)))
    substeps: int = 64
    out_path: str = "results.csv"
    overrides: dict = field(default_factory=dict)
    master_seed: int = 0

    def validate(self) -> "ExperimentConfig":
        err = {}
        if self.experiment not in EXPERIMENTS:
            err["experiment"] = f"unknown experiment {self.experiment!r}"
        if not self.kappa_list:
            err["kappa_list"] = "must be non-empty"
        elif any(not (isinstance(k, (int, float)) and 0 < k <= 0.25) for k in self.kappa_list):
            err["kappa_list"] = "every kappa must lie in (0, 1/4]"
        g = self.grid
        if not isinstance(g, int) or g < 4 or g & (g - 1):
            err["grid"] = "must be a power of two >= 4"
        if not self.seeds:
            err["seeds"] = "must be non-empty"
        elif any(not isinstance(s, int) or s < 0 for s in self.seeds):
            err["seeds"] = "must be non-negative integers"
        if not (isinstance(self.amplitude, (int, float)) and self.amplitude >= 0):
            err["amplitude"] = "must be non-negative"
        if self.profile_name not in PROFILES:
            err["profile_name"] = f"unknown profile; known: {sorted(PROFILES)}"
        if not isinstance(self.substeps, int) or self.substeps < 1:
            err["substeps"] = "must be a positive integer"
        if not isinstance(self.overrides, dict):
            err["overrides"] = "must be a mapping"
        if err:
            raise ConfigInvalid(err)
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigInvalid({k: "unknown field" for k in extra})
        if "experiment" not in d:
            raise ConfigInvalid({"experiment": "required"})
        return cls(**d).validate()

    def to_dict(self) -> dict:
        return asdict(self)


def cell_seed(master_seed: int, kappa_index: int, seed_index: int) -> int:
    ss = np.random.SeedSequence([int(master_seed), int(kappa_index), int(seed_index)])
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))


# --- experiments: each returns a JSON-ready payload dict ----------------------

def _opt(cfg, key, default):
    return cfg.overrides.get(key, default)


def _stream_c0(r, legs):
    if r.amplitude == 0:
        return 0.0
    return max(stream_sup_norm(r, leg) for leg in range(legs)) / r.kappa


def _c1(c0):
    # with no stream function at all only the Poincare-side constant remains
    return bounds.no_enhancement_constant(c0) if c0 > 0 else math.log(4.0 / 3.0) / 2.0


def _tdis_horizon(kappa):
    return int(math.ceil(1.1 * bounds.poincare_bound(kappa))) + 2


def exp_tdis(cfg, kappa, seed):
    r = realize(kappa, cfg.amplitude, get_profile(cfg.profile_name), seed, _tdis_horizon(kappa))
    res = dissipation_time(r, kappa, s=float(_opt(cfg, "s", 0.0)), M=cfg.grid,
                           tol=float(_opt(cfg, "tol", 1e-3)), substeps=cfg.substeps, seed=seed)
    c0 = _stream_c0(r, min(r.horizon, int(math.ceil(res.t_dis_hat)) + 1))
    return {
        "t_dis_hat": res.t_dis_hat, "op_norm_at_t": res.op_norm_at_t, "iters": res.power_iters,
        "s": res.s, "poincare": bounds.poincare_bound(kappa), "C0": c0, "C1": _c1(c0),
    }


def exp_mix(cfg, kappa, seed):
    n_max = int(_opt(cfg, "n_max", 14))
    s = int(_opt(cfg, "s", 0))
    window = tuple(_opt(cfg, "window", [4, 14]))
    r = realize(kappa, cfg.amplitude, get_profile(cfg.profile_name), seed, s + n_max + 2)
    init = TrigPolynomial.random(seed, int(_opt(cfg, "k_max", 4)))
    recs = mix_records(r, init, s, n_max, cfg.grid)
    out = {"records": [[rec.n, rec.ratio, rec.aliased] for rec in recs], "s": s}
    try:
        fit = fit_rate(recs, window)
        out.update(gamma_hat=fit.gamma_hat, prefactor_hat=fit.prefactor_hat, residual=fit.residual,
                   gamma_stderr=fit.gamma_stderr, fit_window=list(fit.fit_window))
    except InsufficientData as e:
        out.update(gamma_hat=None, fit_error=str(e))
    return out


def exp_drift(cfg, kappa, seed):
    p = float(_opt(cfg, "p", 1 / 16))
    s_star = float(_opt(cfg, "s_star", 0.5))
    samples = int(_opt(cfg, "samples", 10_000))
    d = drift_estimate(kappa, cfg.amplitude, p, s_star / n_kappa_of(kappa), samples, 1, seed, cfg.profile_name)
    f = foster_lyapunov_check(kappa, cfg.amplitude, p, samples, seed, s_star=s_star, profile_name=cfg.profile_name)
    return {
        "p": p, "band": s_star / n_kappa_of(kappa), "legs": d.n_legs, "samples": samples,
        "mean_ratio": d.mean_ratio, "ci95_upper": d.ci95_upper,
        "gamma1_hat": f.gamma1_hat, "K_hat": f.K_hat, "slack_min": float(f.slack.min()),
    }


def exp_minorize(cfg, kappa, seed):
    bins = int(_opt(cfg, "bins", 8))
    m = minorization_probe(kappa, cfg.amplitude, int(_opt(cfg, "samples", 100_000)), bins, seed,
                           profile_name=cfg.profile_name)
    return {"bins": bins, "alpha_hat": m.alpha_hat, "ci_low": m.ci_low, "ci_high": m.ci_high}


def exp_bounds(cfg, kappa, seed):
    out = {"poincare": bounds.poincare_bound(kappa)}
    if cfg.amplitude > 0:
        r = realize(kappa, cfg.amplitude, get_profile(cfg.profile_name), seed, 2)
        c0 = _stream_c0(r, 1)
        out.update(C0=c0, C1=_c1(c0), grad_u_sup=r.grad_sup)
        if "gamma" in cfg.overrides:
            rate = bounds.RateParams(float(_opt(cfg, "D", 1.0)), float(cfg.overrides["gamma"]))
            out["corollary"] = bounds.corollary_bound(rate, r.grad_sup, kappa)
    return out


def exp_closeness(cfg, kappa, seed):
    rng = np.random.default_rng(seed)
    t = float(_opt(cfg, "t", rng.uniform(0.25, 6.0)))
    r = realize(kappa, cfg.amplitude, get_profile(cfg.profile_name), seed, int(math.ceil(t)) + 1)
    init = TrigPolynomial.random(seed, int(_opt(cfg, "k_max", 4)))
    rep = closeness_check(r, kappa, init, t, M=cfg.grid, substeps=cfg.substeps)
    return {"t": t, "lhs": rep.lhs, "rhs": rep.rhs, "slack": rep.slack}


def _rate_from(cfg):
    return bounds.RateParams(float(_opt(cfg, "D", 1.0)), float(_opt(cfg, "gamma", 1.0)))


def exp_prop(cfg, kappa, seed):
    rate = _rate_from(cfg)
    r = realize(kappa, cfg.amplitude, get_profile(cfg.profile_name), seed, int(_opt(cfg, "horizon", 64)))
    theta0 = random_bandlimited(seed, int(_opt(cfg, "k_max", 4)), cfg.grid)
    chk = theorem3_quantities(rate, r.grad_sup, kappa, theta0, r, substeps=cfg.substeps)
    return {"tau": chk.tau_kappa, "A": chk.A_kappa, "clamped": chk.clamped,
            "norm_ratio": chk.norm_ratio, "threshold": chk.threshold, "holds": chk.holds}


def exp_rescaled(cfg, kappa, seed):
    eps = kappa
    tol = float(_opt(cfg, "tol", 1e-3))
    r = realize(eps, cfg.amplitude, get_profile(cfg.profile_name), seed, _tdis_horizon(eps))
    base = dissipation_time(r, eps, M=cfg.grid, tol=tol, substeps=cfg.substeps, seed=seed)
    v = rescale(r)
    resc = dissipation_time(v, v.kappa_target, M=cfg.grid, tol=tol, substeps=cfg.substeps, seed=seed)
    out = {"eps": eps, "t_dis_u": base.t_dis_hat, "t_dis_v": resc.t_dis_hat,
           "rel_gap": abs(resc.t_dis_hat * eps / base.t_dis_hat - 1.0)}
    if "gamma" in cfg.overrides:
        rate = bounds.RateParams(float(_opt(cfg, "D", 1.0)), float(cfg.overrides["gamma"]) * eps)
        h = bounds.heuristic_bound(rate, float(_opt(cfg, "C_delta", 1.0)), float(_opt(cfg, "delta", 1e-6)), 2,
                                   v.kappa_target)
        out.update(heuristic=h, ratio=resc.t_dis_hat / h)
    return out


RUNNERS = {
    "tdis": exp_tdis, "mix": exp_mix, "twopoint-drift": exp_drift, "twopoint-minorize": exp_minorize,
    "bounds": exp_bounds, "closeness": exp_closeness, "prop-check": exp_prop, "rescaled-tdis": exp_rescaled,
}


# --- orchestration -----------------------------------------------------------

def _run_cell(args):
    cfg_dict, kappa, seed, derived = args
    cfg = ExperimentConfig(**cfg_dict)
    t0 = time.perf_counter()
    try:
        payload = RUNNERS[cfg.experiment](cfg, kappa, derived)
        status = "ok"
    except (SlowmixError, FloatingPointError, ValueError) as e:
        payload = {"error": f"{type(e).__name__}: {e}"}
        status = "failed"
    return {
        "experiment": cfg.experiment, "kappa": repr(float(kappa)), "amplitude": repr(float(cfg.amplitude)),
        "seed": seed, "status": status, "wall_time_s": f"{time.perf_counter() - t0:.3f}",
        "code_version": __version__, "payload": json.dumps(_jsonable(payload), sort_keys=True),
    }


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _append_row(path: Path, row: dict):
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as fh:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
        if new:
            w.writeheader()
        w.writerow(row)
        # one write per row keeps a killed sweep parseable
        fh.write(buf.getvalue())
        fh.flush()
        os.fsync(fh.fileno())


def _workers():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        raise ConfigInvalid({THREADS_ENV: "must be an integer"})


def run(config: ExperimentConfig) -> Path:
    """Run every (kappa, seed) cell of ``config`` and append rows to ``out_path``."""
    config.validate()
    out = Path(config.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    side = out.with_name(out.name + ".json")
    side.write_text(json.dumps({"config": config.to_dict(), "code_version": __version__}, indent=2, sort_keys=True))
    tasks = [
        (config.to_dict(), k, s, cell_seed(config.master_seed, i, j))
        for i, k in enumerate(config.kappa_list)
        for j, s in enumerate(config.seeds)
    ]
    n = _workers()
    if n == 1:
        for t in tasks:
            _append_row(out, _run_cell(t))
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            for row in pool.map(_run_cell, tasks):
                _append_row(out, row)
    return out


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["kappa"] = float(r["kappa"])
        r["amplitude"] = float(r["amplitude"])
        r["seed"] = int(r["seed"])
        r["payload"] = json.loads(r["payload"])
    return rows


# --- summaries ---------------------------------------------------------------

def loglog_slope(x, y, boot_seed=0, n_boot=0):
    """Slope of ``log y`` against ``log x`` with its standard error and a curvature flag."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    (b, a), cov = np.polyfit(lx, ly, 1, cov="unscaled")
    res = ly - (a + b * lx)
    dof = len(lx) - 2
    se = float(np.sqrt(cov[0, 0] * np.sum(res**2) / dof)) if dof > 0 else float("nan")
    curved = False
    if len(lx) >= 3:
        c2 = np.polyfit(lx, ly, 2)[0]
        span = lx.max() - lx.min()
        curved = bool(abs(c2) * span**2 / 4.0 > 0.01)
    return float(b), se, curved


def _groups(rows):
    g = {}
    for r in rows:
        if r["status"] == "ok":
            g.setdefault(r["experiment"], {}).setdefault(r["kappa"], []).append(r["payload"])
    return g


def sweep_summary(path, out_csv=None) -> list[dict]:
    """Per-experiment scaling summaries; also written as a tidy CSV."""
    rows = read_results(path)
    groups = _groups(rows)
    summary = []
    for exp, by_k in sorted(groups.items()):
        ks = sorted(by_k)
        if exp in ("tdis", "rescaled-tdis"):
            key = "t_dis_hat" if exp == "tdis" else "t_dis_v"
            med = [float(np.median([p[key] for p in by_k[k]])) for k in ks]
            for k, m in zip(ks, med):
                summary.append({"experiment": exp, "kappa": k, "quantity": f"median_{key}", "value": m})
            if len(ks) >= 2:
                b, se, curved = loglog_slope(ks, med)
                summary.append({"experiment": exp, "kappa": "", "quantity": "loglog_slope", "value": b,
                                "stderr": se, "curvature_flag": curved})
        elif exp == "mix":
            meds = []
            for k in ks:
                g = [p["gamma_hat"] for p in by_k[k] if p.get("gamma_hat") is not None]
                m = float(np.median(g)) if g else float("nan")
                meds.append(m)
                summary.append({"experiment": exp, "kappa": k, "quantity": "median_gamma_hat", "value": m,
                                "fits": len(g)})
            good = [m for m in meds if np.isfinite(m) and m > 0]
            if len(good) >= 2:
                summary.append({"experiment": exp, "kappa": "", "quantity": "gamma_max_over_min",
                                "value": max(good) / min(good)})
        elif exp == "twopoint-drift":
            K = []
            for k in ks:
                for q in ("ci95_upper", "gamma1_hat", "K_hat"):
                    v = float(np.median([p[q] for p in by_k[k]]))
                    summary.append({"experiment": exp, "kappa": k, "quantity": f"median_{q}", "value": v})
                    if q == "K_hat":
                        K.append(v)
            if len(ks) >= 2 and all(v > 0 for v in K):
                b, se, _ = loglog_slope([1.0 / k for k in ks], K)
                summary.append({"experiment": exp, "kappa": "", "quantity": "K_slope_in_inv_kappa", "value": b,
                                "stderr": se})
        else:
            for k in ks:
                summary.append({"experiment": exp, "kappa": k, "quantity": "rows", "value": len(by_k[k])})
    if not any(len(v) >= 2 for v in groups.values()):
        raise InsufficientData("need at least two kappa values in one experiment")
    out_csv = Path(out_csv) if out_csv else Path(str(path)).with_suffix(".summary.csv")
    cols = ["experiment", "kappa", "quantity", "value", "stderr", "curvature_flag", "fits"]
    with open(out_csv, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, restval="")
        w.writeheader()
        w.writerows(summary)
    return summary


PLOT_KINDS = ("mix-decay", "tdis-scaling", "drift-ci")


def emit_plotdata(path, kind: str, out_dir=None) -> Path:
    """Write an ``(x, y, series)`` CSV for one plot kind; returns its path."""
    if kind not in PLOT_KINDS:
        raise UnknownKind(f"unknown plot kind {kind!r}; known: {list(PLOT_KINDS)}")
    rows = read_results(path)
    out_dir = Path(out_dir) if out_dir else Path(str(path)).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    pts = []
    ok = [r for r in rows if r["status"] == "ok"]
    if kind == "mix-decay":
        for r in ok:
            if r["experiment"] != "mix":
                continue
            label = f"kappa={r['kappa']:g},seed={r['seed']}"
            for n, ratio, _ in r["payload"]["records"]:
                if ratio > 0:
                    pts.append((n, math.log(ratio), label))
    elif kind == "tdis-scaling":
        ks = set()
        for r in ok:
            if r["experiment"] == "tdis":
                pts.append((1.0 / r["kappa"], r["payload"]["t_dis_hat"], "measured"))
                ks.add(r["kappa"])
                pts.append((1.0 / r["kappa"], r["payload"]["C1"] / r["kappa"], "C1_over_kappa"))
        for k in sorted(ks):
            pts.append((1.0 / k, bounds.poincare_bound(k), "poincare"))
    else:
        for r in ok:
            if r["experiment"] == "twopoint-drift":
                pts.append((r["kappa"], r["payload"]["mean_ratio"], "mean_ratio"))
                pts.append((r["kappa"], r["payload"]["ci95_upper"], "ci95_upper"))
    target = out_dir / f"{kind}.csv"
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "series"])
        for x, y, s in pts:
            w.writerow([repr(float(x)), repr(float(y)), s])
    return target
