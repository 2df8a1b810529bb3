"""Command-line interface: ``tvstokes <command> [options]``.

Exit codes: 0 success, 2 usage or configuration error, 3 unreadable or
unsupported file, 4 numerical divergence.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .decomposition import DdConfig, LayoutError, alpha_hat_for
from .grid import ShapeError, read_tvsf, write_tvsf
from .images import PHANTOMS, ImageFormatError, NoiseSpec, add_noise, load_image, phantom, save_image
from .kernels import NumericalDivergence
from .metrics import MetricReport, perf_tau
from .pipeline import NOISE_VARIANCES, DdSettings, PipelineConfig, dd_experiment, run_tvstokes, sweep
from .solvers import SolverConfig

EXIT_USAGE, EXIT_FORMAT, EXIT_DIVERGENCE = 2, 3, 4


class UsageError(Exception):
    pass


def read_key_values(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, value = (x.strip() for x in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _pair(text: str, sep: str, what: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.lower().split(sep))
    except ValueError:
        raise UsageError(f"{what} must look like A{sep}B, got {text!r}") from None
    return a, b


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _load(spec: str, size: int) -> np.ndarray:
    """An image path, or ``phantom:<name>`` for a generated test image."""
    if spec.startswith("phantom:"):
        try:
            return phantom(spec.split(":", 1)[1], size)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return load_image(spec)


# --- configuration ----------------------------------------------------------------

_SOLVER_KEYS = {"delta": float, "alpha": float, "mu": float, "epsilon": float, "step": float,
                "tol": float, "max_it": int, "max_inner_it": int, "seed": int, "variant": str,
                "grid": str, "overlap": str, "alpha_hat": float, "outer_tol": float,
                "max_outer_it": int, "workers": int}


def _add_solver_flags(p: argparse.ArgumentParser, dd: bool = True) -> None:
    g = p.add_argument_group("model and solver")
    g.add_argument("--config", help="flat 'key = value' file; flags override it")
    g.add_argument("--variant", choices=["irv1", "irv2"], type=str.lower)
    g.add_argument("--delta", type=float, help="step-1 regularization weight")
    a = g.add_mutually_exclusive_group()
    a.add_argument("--alpha", type=float, help="step-2 fidelity weight")
    a.add_argument("--mu", type=float, help="1/alpha")
    g.add_argument("--epsilon", type=float, help="normal-field regularization (IRV1)")
    g.add_argument("--step", type=float, help="Chambolle step size t")
    g.add_argument("--tol", type=float, help="stopping tolerance T")
    g.add_argument("--max-it", type=int, help="iteration cap for single-domain solves")
    g.add_argument("--seed", type=int, help="noise seed")
    if dd:
        d = p.add_argument_group("domain decomposition")
        d.add_argument("--grid", help="subdomain grid M2xM1 (enables decomposition)")
        d.add_argument("--overlap", help="overlaps sy,sx")
        d.add_argument("--max-inner-it", type=int, help="local updates per outer sweep")
        d.add_argument("--max-outer-it", type=int, help="outer sweep cap")
        d.add_argument("--outer-tol", type=float, help="outer stopping tolerance")
        d.add_argument("--alpha-hat", type=float, help="relaxation weight (default from the grid)")
        d.add_argument("--workers", type=int, help="threads for local solves")


def resolve_options(args: argparse.Namespace) -> dict:
    """Merge the config file (if any) with explicit flags; flags win."""
    opts: dict = {}
    if getattr(args, "config", None):
        for key, value in read_key_values(args.config).items():
            if key not in _SOLVER_KEYS:
                raise UsageError(f"unknown config key {key!r}")
            try:
                opts[key] = _SOLVER_KEYS[key](value)
            except ValueError:
                raise UsageError(f"bad value for {key}: {value!r}") from None
    for key in _SOLVER_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            opts[key] = v
    if "alpha" in opts and "mu" in opts and getattr(args, "alpha", None) is None \
            and getattr(args, "mu", None) is None:
        raise UsageError("config sets both alpha and mu")
    # an explicit flag replaces the other spelling from the config file
    if getattr(args, "alpha", None) is not None:
        opts.pop("mu", None)
    if getattr(args, "mu", None) is not None:
        opts.pop("alpha", None)
    return opts


def build_config(opts: dict, base: PipelineConfig | None = None, force_dd: bool = False) -> PipelineConfig:
    base = base or PipelineConfig()
    s = base.solver
    kw = {}
    for key, field in (("delta", "delta"), ("alpha", "alpha"), ("epsilon", "epsilon"),
                       ("step", "t"), ("tol", "tol"), ("max_it", "max_it")):
        if key in opts:
            kw[field] = opts[key]
    if "mu" in opts:
        if opts["mu"] <= 0:
            raise UsageError("mu must be positive")
        kw["alpha"] = 1.0 / opts["mu"]
    try:
        solver = replace(s, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    dd = base.dd
    if "grid" in opts or "overlap" in opts or force_dd or dd is not None:
        dd = dd or DdSettings()
        m2, m1 = _pair(opts["grid"], "x", "--grid") if "grid" in opts else (dd.m2, dd.m1)
        sy, sx = _pair(opts["overlap"], ",", "--overlap") if "overlap" in opts else (dd.overlap_y, dd.overlap_x)
        c = dd.config
        try:
            c = replace(c, max_inner_it=opts.get("max_inner_it", c.max_inner_it),
                        max_it=opts.get("max_outer_it", c.max_it),
                        outer_tol=opts.get("outer_tol", c.outer_tol),
                        alpha_hat=opts.get("alpha_hat", c.alpha_hat),
                        workers=opts.get("workers", c.workers),
                        t=opts.get("step", c.t))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        dd = DdSettings(m2, m1, sy, sx, c)
    try:
        return replace(base, solver=solver, dd=dd, variant=opts.get("variant", base.variant))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# --- commands ---------------------------------------------------------------------

def cmd_add_noise(args) -> int:
    gt = _load(args.input, args.size)
    noisy = add_noise(gt, NoiseSpec(args.variance, args.seed))
    _write_field(noisy, args.output, args.bits)
    return 0


def _write_field(field, path, bits=8):
    if str(path).lower().endswith(".tvsf"):
        write_tvsf(path, field)
    else:
        save_image(field, path, bits)


def _read_field(path, size=64):
    if str(path).lower().endswith(".tvsf"):
        return read_tvsf(path)[0]
    return _load(path, size)


def cmd_denoise(args) -> int:
    opts = resolve_options(args)
    cfg = build_config(opts)
    d0 = _read_field(args.input, args.size)
    if d0.ndim != 2:
        raise UsageError("input must be a scalar field")
    res = run_tvstokes(d0, cfg)
    _write_field(res.d, args.output, args.bits)
    if args.tau_out:
        write_tvsf(args.tau_out, res.tau)
    if args.trace_dir:
        out = Path(args.trace_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, tr in res.traces.items():
            tr.to_csv(out / f"energy_{name}.csv")
    for name, tr in res.traces.items():
        print(f"{name}: {tr.iterations} iterations, final energy {tr.final!r}")
    return 0


def cmd_sweep(args) -> int:
    opts = resolve_options(args)
    cfg = build_config(opts)
    lists = {}
    for name in ("deltas", "irv1_alphas", "epsilons", "irv2_alphas"):
        v = getattr(args, name)
        if v is not None:
            lists[name] = _floats(v)
            if not lists[name]:
                raise UsageError(f"--{name.replace('_', '-')} is empty")
    if args.irv1_mus is not None:
        mus = _floats(args.irv1_mus)
        if not mus or any(m <= 0 for m in mus):
            raise UsageError("--irv1-mus must be positive")
        lists["irv1_alphas"] = tuple(1.0 / m for m in mus)
    cfg = replace(cfg, **lists, dd=None)
    variances = _floats(args.variances) if args.variances else NOISE_VARIANCES
    gt = _read_field(args.gt, args.size)
    res = sweep(gt, variances, cfg, seed=opts.get("seed", 0), image_id=Path(args.gt).stem
                if not args.gt.startswith("phantom:") else args.gt.split(":", 1)[1])
    res.to_csv(args.output)
    for (var, variant), row in sorted(res.best.items()):
        print(f"sigma^2={var:g} delta={res.selected_delta[var]:g} {variant}: "
              f"PSNR {row[4]:.3f} MSSIM {row[5]:.4f} ({row[3]})")
    return 0


def cmd_dd_experiment(args) -> int:
    opts = resolve_options(args)
    base = PipelineConfig(solver=SolverConfig(delta=0.15, alpha=10.0, epsilon=1e-3),
                          dd=DdSettings(config=DdConfig(max_it=args.outer_it, outer_tol=0.0)))
    cfg = build_config(opts, base, force_dd=True)
    if cfg.dd.config.alpha_hat is None:
        cfg = replace(cfg, dd=replace(cfg.dd, config=replace(
            cfg.dd.config, alpha_hat=alpha_hat_for(cfg.dd.m1, cfg.dd.m2))))
    refs = None
    if args.ref_energies:
        try:
            refs = {k: float(v) for k, v in read_key_values(args.ref_energies).items()}
        except ValueError:
            raise UsageError("reference energies must be numbers") from None
    gt = _read_field(args.gt, args.size)
    exp = dd_experiment(gt, cfg, noise=args.noise, seed=opts.get("seed", 0),
                        reference_it=args.reference_it, out_dir=args.out_dir,
                        reference_energies=refs)
    out = Path(args.out_dir)
    with open(out / "reference_energies.txt", "w", encoding="utf-8") as fh:
        for k, v in exp.reference.items():
            fh.write(f"{k} = {v!r}\n")
    for key in exp.traces:
        print(f"{key}: {exp.traces[key].iterations} sweeps, relative gap {exp.relative_gap(key):.3e}")
    return 0


def cmd_metrics(args) -> int:
    d = _read_field(args.result)
    gt = _read_field(args.gt)
    if d.shape != gt.shape:
        raise UsageError(f"shape mismatch {d.shape} vs {gt.shape}")
    if d.ndim == 3:
        print(f"perf_tau {perf_tau(d, gt)!r}")
        for i, c in enumerate("xy"):
            r = MetricReport.of(d[i], gt[i])
            print(f"{c}: PSNR {r.psnr!r} MSSIM {r.mssim!r}")
    else:
        r = MetricReport.of(d, gt)
        print(f"PSNR {r.psnr!r}\nMSSIM {r.mssim!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    phantoms = ", ".join(f"phantom:{k}" for k in PHANTOMS)
    p = argparse.ArgumentParser(prog="tvstokes", description="Two-step TV-Stokes image denoising.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("add-noise", help="add seeded Gaussian noise to an image")
    a.add_argument("input", help=f"PNG/PGM/TVSF path or one of {phantoms}")
    a.add_argument("output", help="PNG/PGM (clamped, quantized) or TVSF (raw floats)")
    a.add_argument("--variance", type=float, required=True)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--bits", type=int, choices=[8, 16], default=8)
    a.add_argument("--size", type=int, default=64, help="phantom size")
    a.set_defaults(func=cmd_add_noise)

    d = sub.add_parser("denoise", help="run both steps on one image")
    d.add_argument("input")
    d.add_argument("output")
    d.add_argument("--tau-out", help="write the smoothed tangent field as TVSF")
    d.add_argument("--trace-dir", help="write per-solver energy CSVs here")
    d.add_argument("--bits", type=int, choices=[8, 16], default=8)
    d.add_argument("--size", type=int, default=64, help="phantom size")
    _add_solver_flags(d)
    d.set_defaults(func=cmd_denoise)

    s = sub.add_parser("sweep", help="parameter sweep against a ground truth")
    s.add_argument("gt", help=f"ground truth path or one of {phantoms}")
    s.add_argument("output", help="CSV report")
    s.add_argument("--variances", help="comma-separated noise variances")
    s.add_argument("--deltas")
    s.add_argument("--irv1-alphas")
    s.add_argument("--irv1-mus", help="alternative to --irv1-alphas")
    s.add_argument("--epsilons")
    s.add_argument("--irv2-alphas")
    s.add_argument("--size", type=int, default=64, help="phantom size")
    _add_solver_flags(s, dd=False)
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("dd-experiment", help="decomposed solves against long reference runs")
    e.add_argument("gt", nargs="?", default="phantom:disk-stripes")
    e.add_argument("--out-dir", default="dd_experiment")
    e.add_argument("--noise", type=float, default=0.01)
    e.add_argument("--outer-it", type=int, default=1000, help="outer sweeps per decomposed solve")
    e.add_argument("--reference-it", type=int, default=10**6)
    e.add_argument("--ref-energies", help="'key = value' file with tfs/irv1/irv2 reference energies")
    e.add_argument("--size", type=int, default=64, help="phantom size")
    _add_solver_flags(e)
    e.set_defaults(func=cmd_dd_experiment)

    m = sub.add_parser("metrics", help="PSNR/MSSIM of a result (or perf score of tangent fields)")
    m.add_argument("result")
    m.add_argument("gt")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, LayoutError) as exc:
        print(f"tvstokes: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ImageFormatError, ShapeError, FileNotFoundError) as exc:
        print(f"tvstokes: error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except NumericalDivergence as exc:
        print(f"tvstokes: numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
