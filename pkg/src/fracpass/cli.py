"""Command line entry point.

    fracpass <command> --config run.json --out results/ [--format json|csv] [--threads k]

Exit codes: 0 success, 2 configuration error, 3 solver did not converge,
4 a verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    appendix_rate_fit,
    check_cutoff_bounds,
    check_power_inequalities,
    concentration_diagnostics,
    predicted_extension_slope,
)
from .config import RunConfig, parse_config
from .energies import HSpec, Params, eval_f, eval_I, h1_ball, make_h
from .errors import ConfigurationError, DegeneratePathError, FracpassError, HypothesisH1Error, ThresholdError
from .grid import Field, make_grid, read_field, write_field
from .nonlocal_ops import critical_exponent, seminorm, set_threads
from .profiles import (
    BubbleSpec,
    CutoffSpec,
    bubble,
    calibrate,
    expansion_rates,
    extrapolated_sobolev_constant,
    sobolev_constant_estimate,
)
from .solvers import (
    default_sobolev_constant,
    mp_path_sup,
    solve_local_min,
    solve_mountain_pass,
    threshold_C_star,
    threshold_inequality_check,
)

COMMANDS = ("solve-min", "solve-mp", "verify", "bubble", "appendix", "concentration", "threshold")
REPORT_VERSION = "1.0"

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_CHECK_FAILED = 0, 2, 3, 4

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "fracpass run report",
    "type": "object",
    "required": ["report_version", "artifact_version", "command", "config", "outputs", "checks", "wall_clock_s"],
    "properties": {
        "report_version": {"const": REPORT_VERSION},
        "artifact_version": {"type": "string"},
        "command": {"enum": list(COMMANDS)},
        "config": {"type": "object", "required": ["grid", "params"]},
        "outputs": {"type": "object"},
        "checks": {"type": "object", "additionalProperties": {"type": "boolean"}},
        "converged": {"type": ["boolean", "null"]},
        "files": {"type": "array", "items": {"type": "string"}},
        "wall_clock_s": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}

log = logging.getLogger("fracpass")


class _Run:
    """Shared state for one command: grid, params and lazily computed pieces."""

    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.grid = make_grid(cfg.grid.spec())
        n = cfg.grid.dim
        hc = cfg.h
        center = tuple(hc.center) if hc.center is not None else (0.0,) * n
        self.hspec = HSpec(hc.family, hc.amplitude, center, hc.width, hc.neg_ratio, hc.offset)
        self.h = make_h(self.grid, self.hspec)
        p = cfg.params
        self.params = Params(p.s, p.q, p.eps, self.h)
        self.files: list[str] = []

    @property
    def S_hat(self) -> float:
        if self.cfg.solve.S_hat is not None:
            return self.cfg.solve.S_hat
        return default_sobolev_constant(self.cfg.grid.dim, self.cfg.params.s)

    def bubble_spec(self) -> BubbleSpec:
        b = self.cfg.bubble
        xi = tuple(b.xi) if b.xi is not None else None
        if xi is None:
            center, _, _ = h1_ball(self.h)
            xi = tuple(center)
        c = b.c_ns if b.c_ns is not None else calibrate(self.grid, self.params.s).c_ns
        return BubbleSpec(b.mu, xi, c)

    def cutoff_spec(self, spec: BubbleSpec) -> CutoffSpec:
        c = self.cfg.cutoff
        if c.r is not None:
            x0 = tuple(c.x0) if c.x0 is not None else spec.xi
            return CutoffSpec(c.r, x0)
        center, radius, _ = h1_ball(self.h)
        return CutoffSpec(radius, tuple(center))

    def save(self, name: str, u: Field):
        path = write_field(u, self.out / name)
        self.files.append(path.name)


def _result_dict(r) -> dict:
    return {
        "energy": r.energy,
        "seminorm": r.seminorm,
        "residual": r.residual,
        "relative_residual": r.relative_residual,
        "iters": r.iters,
        "converged": r.converged,
        "min_value": r.min_value,
        "energy_trace": list(r.energy_trace),
        "residual_trace": list(r.residual_trace),
    }


def _local_min(run: _Run):
    res = solve_local_min(run.params, run.cfg.solve.options(), run.S_hat)
    out = _result_dict(res)
    out.update({k: v for k, v in res.info.items()})
    out["rho_recipe"] = "c1 = ||h||_r S^-(q+1)/2 / (q+1), c2 = S^-(p*/2) / p*"
    return res, out


def cmd_solve_min(run: _Run):
    res, out = _local_min(run)
    run.save("u_eps.field", res.u)
    checks = {
        "negative_energy": res.energy < 0,
        "inside_ball": res.seminorm <= out["rho"] * (1 + 1e-12),
        "nonnegative": res.min_value >= -run.cfg.solve.nonneg_slack,
    }
    return {"local_min": out}, checks, res.converged


def cmd_solve_mp(run: _Run):
    prior = run.out / "u_eps.field"
    outputs = {}
    if prior.is_file():
        u_eps = read_field(prior)
        if u_eps.grid.spec != run.grid.spec:
            raise ConfigurationError(f"{prior}: grid does not match the config")
        outputs["local_min"] = {"source": prior.name}
        conv_min = True
    else:
        res, out = _local_min(run)
        u_eps = res.u
        run.save("u_eps.field", u_eps)
        outputs["local_min"] = out
        conv_min = res.converged
    spec = run.bubble_spec()
    cut = run.cutoff_spec(spec)
    s = run.params.s
    path = mp_path_sup(run.params, u_eps, spec, cut)
    mp = solve_mountain_pass(run.params, u_eps, run.cfg.solve.options(), spec, cut)
    S = run.S_hat
    n = run.grid.dim
    level_cap = s / n * S ** (n / (2 * s))
    thr = threshold_C_star(run.params, run.params.h_norm(run.params.holder_exponent()), S, mp.energy)
    z_norm = seminorm(bubble(run.grid, spec, s), s)
    u_tilde = mp.info["u_tilde"]
    run.save("v.field", mp.u)
    run.save("u_tilde.field", u_tilde)
    mp_out = _result_dict(mp)
    mp_out.update({"residual_f_u_tilde": mp.info["residual_f"], "bubble_seminorm": z_norm})
    outputs.update(
        {
            "bubble": {"mu": spec.mu, "xi": list(spec.xi), "c_ns": spec.c_ns, "cutoff_r": cut.r, "cutoff_x0": list(cut.x0)},
            "path_sup": {"sup_I": path.sup_I, "t_I": path.t_I, "sup_Istar": path.sup_Istar, "t_Istar": path.t_Istar, "T1": path.T1, "max_gap_I_minus_Istar": path.max_gap},
            "mountain_pass": mp_out,
            "threshold": _threshold_dict(thr),
            "level_cap": level_cap,
        }
    )
    checks = {
        "path_below_cap": path.sup_Istar < level_cap,
        "I_le_Istar_on_path": path.max_gap <= 1e-12 * max(1.0, abs(path.sup_Istar)),
        "nonnegative_v": mp.min_value >= -run.cfg.solve.nonneg_slack,
        "distinct_from_zero": mp.seminorm > 0.05 * z_norm,
        "level_in_range": 0 < mp.energy < level_cap,
        "u_tilde_residual": mp.info["residual_f"] < 10 * run.cfg.solve.grad_tol,
    }
    return outputs, checks, bool(conv_min and mp.converged)


def _threshold_dict(t) -> dict:
    return {
        "S_hat": t.S_hat,
        "r": t.r,
        "C_star": t.C_star,
        "C_star_grid": t.C_star_grid,
        "level": t.level,
        "bound": t.bound,
        "pass": t.passed,
    }


def cmd_threshold(run: _Run):
    p = run.params
    norm_h_r = p.h_norm(p.holder_exponent())
    t = threshold_C_star(p, norm_h_r, run.S_hat)
    viol, worst = threshold_inequality_check(p, norm_h_r, seed=run.cfg.solve.seed)
    out = _threshold_dict(t)
    out.update({"norm_h_r": norm_h_r, "samples": 10_000, "violations": viol, "worst_margin": worst})
    checks = {
        "closed_form_matches_grid": abs(t.C_star - t.C_star_grid) <= 1e-6,
        "inequality_holds": viol == 0,
        "r_gt_1": t.r > 1,
    }
    return {"threshold": out}, checks, None


def _lemma_dict(r) -> dict:
    return {
        "lemma_id": r.lemma_id,
        "samples": r.samples,
        "violations": r.violations,
        "worst_margin": r.worst_margin,
        "derived_constant": r.derived_constant,
        "details": r.details,
    }


def cmd_verify(run: _Run):
    v = run.cfg.verify
    reports = check_power_inequalities(v.p_samples, v.ab_samples, v.k_samples, v.q_samples, v.seed)
    cut = check_cutoff_bounds(run.grid, run.params.s, tuple(v.cutoff_radii))
    reports.append(cut)
    checks = {r.lemma_id: r.violations == 0 for r in reports}
    return {"lemmas": [_lemma_dict(r) for r in reports]}, checks, None


def cmd_bubble(run: _Run):
    s, n = run.params.s, run.grid.dim
    cal = calibrate(run.grid, s)
    est = sobolev_constant_estimate(run.grid, s, c_ns=cal.c_ns)
    out = {
        "c_ns": cal.c_ns,
        "calibration_relative_residual": cal.relative_residual,
        "S_hat_grid": est.S_hat,
        "S_pow_grid": est.S_pow,
        "seminorm_sq": est.seminorm_sq,
        "norm_pow": est.norm_pow,
    }
    S_pow = est.S_pow
    if run.cfg.bubble.extrapolate:
        ext = extrapolated_sobolev_constant(n, s, *_extrap_args(n))
        out.update({"S_hat": ext.S_hat, "S_pow": ext.S_pow, "c_ns_large_box": ext.c_ns})
        S_pow = ext.S_pow
    r = run.cfg.bubble.expansion_cutoff or run.grid.half_width
    fit = expansion_rates(run.grid, s, CutoffSpec(r, (0.0,) * n), out.get("c_ns_large_box", cal.c_ns), S_pow, tuple(run.cfg.bubble.expansion_mus))
    out["expansion"] = {
        "mus": list(fit.mus),
        "energy_excess": list(fit.energy_excess),
        "mass_loss": list(fit.mass_loss),
        "excess_slope": fit.excess_slope,
        "mass_slope": fit.mass_slope,
        "cutoff_r": r,
    }
    checks = {
        "calibration_residual_below_10pct": cal.relative_residual < 0.1,
        "excess_slope": bool(fit.excess_slope >= 0.85 * (n - 2 * s)),
        "mass_slope": bool(fit.mass_slope >= 0.85 * n),
    }
    return {"bubble": out}, checks, None


def _extrap_args(n):
    from .solvers import _DEFAULT_EXTRAP

    return _DEFAULT_EXTRAP[n]


def cmd_appendix(run: _Run):
    a = run.cfg.appendix
    rows, checks = [], {}
    for N, s in a.cases:
        N = int(N)
        slope = appendix_rate_fit(float(s), N, a.R_list, a.resolution)
        pred = predicted_extension_slope(N, float(s))
        ok = abs(slope - pred) <= a.tolerance and np.sign(slope) == np.sign(pred)
        rows.append({"N": N, "s": float(s), "slope": slope, "predicted": pred})
        checks[f"slope[N={N},s={s:g}]"] = bool(ok)
    return {"appendix": rows, "R_list": list(a.R_list)}, checks, None


def cmd_concentration(run: _Run):
    c = run.cfg.concentration
    s = run.params.s
    S = run.S_hat
    cal = calibrate(run.grid, s).c_ns
    bub = concentration_diagnostics(run.grid, s, S, cal, "bubbling", c.n_max, c.delta)
    esc = concentration_diagnostics(run.grid, s, S, cal, "escaping", c.n_max, c.delta, c.ball_radius)
    half = [t for t in esc.terms if t["center"] >= run.grid.half_width / 2]
    checks = {
        "bubbling_mass_fraction": bub.terms[-1]["ball_fraction"] > 0.9,
        "bubbling_fraction_increasing": bool(np.all(np.diff(bub.ball_fractions) > 0)),
        "relation_within_5pct": bub.worst_relation_ratio <= 1.05,
        "escaping_leaves_ball": all(t["ball_fraction"] < 0.1 for t in half),
    }
    outputs = {
        "bubbling": {"description": bub.description, "terms": bub.terms, "warnings": bub.warnings},
        "escaping": {"description": esc.description, "terms": esc.terms, "warnings": esc.warnings},
    }
    return outputs, checks, None


HANDLERS = {
    "solve-min": cmd_solve_min,
    "solve-mp": cmd_solve_mp,
    "verify": cmd_verify,
    "bubble": cmd_bubble,
    "appendix": cmd_appendix,
    "concentration": cmd_concentration,
    "threshold": cmd_threshold,
}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else None
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def run(command: str, cfg: RunConfig, out: Path) -> tuple[dict, int]:
    """Execute ``command`` and return (report, exit code)."""
    if command not in HANDLERS:
        raise ConfigurationError(f"unknown command {command!r}")
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    state = _Run(cfg, out)
    outputs, checks, converged = HANDLERS[command](state)
    report = {
        "report_version": REPORT_VERSION,
        "artifact_version": __version__,
        "command": command,
        "config": cfg.to_dict(),
        "outputs": outputs,
        "checks": {k: bool(v) for k, v in checks.items()},
        "converged": converged,
        "files": state.files,
        "wall_clock_s": time.perf_counter() - t0,
    }
    report = _jsonable(report)
    if converged is False:
        code = EXIT_NONCONVERGED
    elif not all(report["checks"].values()):
        code = EXIT_CHECK_FAILED
    else:
        code = EXIT_OK
    return report, code


def _flatten(prefix, x, rows):
    if isinstance(x, dict):
        for k, v in x.items():
            _flatten(f"{prefix}.{k}" if prefix else k, v, rows)
    elif isinstance(x, list):
        for i, v in enumerate(x):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, x))


def write_report(report: dict, out: Path, fmt: str) -> Path:
    if fmt == "json":
        path = out / "report.json"
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    else:
        path = out / "report.csv"
        rows: list = []
        _flatten("", report, rows)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["key", "value"])
            w.writerows(rows)
    return path


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracpass", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", default="fracpass-out", help="output directory for reports and field files")
    ap.add_argument("--format", choices=("json", "csv"), default="json")
    ap.add_argument("--threads", type=int, default=None, help="FFT workers (default: $FRACPASS_THREADS or 1)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be at least 1", file=sys.stderr)
            return EXIT_CONFIG
        set_threads(args.threads)
    out = Path(args.out)
    try:
        cfg = parse_config(args.config)
        report, code = run(args.command, cfg, out)
    except (ConfigurationError, ThresholdError, HypothesisH1Error) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegeneratePathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except FracpassError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    path = write_report(report, out, args.format)
    failed = [k for k, v in report["checks"].items() if not v]
    print(f"{args.command}: wrote {path}" + (f"; failed checks: {', '.join(failed)}" if failed else ""))
    return code


if __name__ == "__main__":
    sys.exit(main())
