"""Command-line interface: generate | reduce | analyze | verify.

Settings resolve with the precedence: command-line flags, then a
``key = value`` config file (``--config``), then built-in defaults.
All outputs are written atomically; a seeded run rewrites its outputs
byte-identically (timing artifacts excepted).
"""

import argparse
import math
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import irka
from .analysis import (
    eval_full,
    eval_reduced,
    schur_equivalence_check,
    speedup_report,
    stability_report,
    sweep,
)
from .errors import MorkitError
from .lu import factor
from .oracles import oracle_finite_difference_derivative
from .sparse import assemble_shifted_augmented
from .system import (
    atomic_write_text,
    generate_synthetic,
    load_system,
    read_keyvalue,
    save_system,
    validate,
)

_DEFAULTS = {
    "max_iter": 20,
    "shift_tol": 1e-3,
    "inner_max_iter": 20,
    "inner_tol": 1e-5,
    "freq_lo": 10.0,
    "freq_hi": 1e4,
    "seed": 0,
    "one_sided": "auto",
}


@dataclass
class RunConfig:
    """Fully resolved reduction settings."""

    r: int
    max_iter: int
    shift_tol: float
    inner_max_iter: float
    inner_tol: float
    freq_lo: float
    freq_hi: float
    seed: int
    one_sided: str
    timings: bool

    @classmethod
    def from_sources(cls, args, file_kv):
        def pick(name, cast):
            cli_value = getattr(args, name, None)
            if cli_value is not None:
                return cli_value
            if name in file_kv:
                return cast(file_kv[name])
            return _DEFAULTS[name]

        r = args.r if args.r is not None else (
            int(file_kv["r"]) if "r" in file_kv else None
        )
        if r is None:
            raise MorkitError("reduced order r missing (give --r or put r in --config)")
        one_sided = pick("one_sided", str)
        if one_sided not in ("auto", "on", "off"):
            raise MorkitError(f"one_sided must be auto/on/off, got {one_sided!r}")
        return cls(
            r=int(r),
            max_iter=pick("max_iter", int),
            shift_tol=pick("shift_tol", float),
            inner_max_iter=pick("inner_max_iter", int),
            inner_tol=pick("inner_tol", float),
            freq_lo=pick("freq_lo", float),
            freq_hi=pick("freq_hi", float),
            seed=pick("seed", int),
            one_sided=one_sided,
            timings=bool(getattr(args, "timings", False)),
        )

    def to_irka_config(self):
        force = {"auto": None, "on": True, "off": False}[self.one_sided]
        return irka.IrkaConfig(
            r=self.r,
            max_iter=int(self.max_iter),
            shift_tol=float(self.shift_tol),
            inner_max_iter=int(self.inner_max_iter),
            inner_tol=float(self.inner_tol),
            freq_range=(float(self.freq_lo), float(self.freq_hi)),
            seed=int(self.seed),
            force_one_sided=force,
        )


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _log_grid(lo, hi, points):
    return np.logspace(math.log10(lo), math.log10(hi), points)


def cmd_generate(args):
    system = generate_synthetic(
        args.n1, args.n2, args.m, args.p,
        seed=args.seed,
        symmetric=args.symmetric,
        proportional_damping=tuple(args.damping),
    )
    manifest = save_system(system, args.out)
    report = validate(system)
    print(f"wrote {manifest}")
    print(report.format(), end="")
    return 0


def cmd_reduce(args):
    file_kv = read_keyvalue(args.config) if args.config else {}
    config = RunConfig.from_sources(args, file_kv)
    system = load_system(args.manifest)
    rom, trace = irka.irka_second_order_index1(system, config.to_irka_config())
    out = Path(args.out)
    irka.save_reduced_model(rom, out)
    atomic_write_text(out / "trace.log", trace.format(include_timings=config.timings))
    if args.index1_form:
        back = irka.back_to_index1(rom, system, trace.final_basis)
        save_system(back, out / "index1")
    marker = out / "NOT_CONVERGED"
    print(f"converged {str(trace.converged).lower()}")
    print(f"iterations {trace.iterations}")
    print(f"final_order {trace.final_order}")
    if not trace.converged:
        atomic_write_text(marker, "IRKA hit the iteration cap before the shift tolerance\n")
        return 2
    marker.unlink(missing_ok=True)
    return 0


def cmd_analyze(args):
    system = load_system(args.manifest)
    rom = irka.load_reduced_model(args.rom)
    if rom.m != system.m or rom.p != system.p:
        raise MorkitError(
            f"reduced model is {rom.p}x{rom.m} but system is {system.p}x{system.m}"
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    omegas = _log_grid(args.freq[0], args.freq[1], args.points)
    result = sweep(system, rom, omegas, max_workers=args.workers)
    result.write_csv(out / "sweep.csv")
    report = stability_report(rom)
    atomic_write_text(out / "stability.txt", report.format())
    if args.channel:
        i, o = args.channel
        if not (0 <= i < system.m and 0 <= o < system.p):
            raise MorkitError(
                f"channel ({i}, {o}) out of range for m={system.m}, p={system.p}"
            )
        atomic_write_text(out / f"channel_{i}_{o}.csv", result.channel_csv(i, o))
    if args.benchmark:
        timing = speedup_report(system, rom, omegas, repetitions=args.benchmark)
        atomic_write_text(out / "timing.txt", timing.format_table())
        print(timing.format_table(), end="")
    finite = result.rel_err[np.isfinite(result.rel_err)]
    worst = float(np.max(finite)) if finite.size else math.nan
    print(f"wrote {out / 'sweep.csv'}")
    print(f"points {args.points}")
    print(f"max_rel_err {worst:.17g}")
    print(f"stable {str(report.stable).lower()}")
    return 0


def _verify_checks(system, args):
    """Yield (name, passed, detail) for the library's invariants."""
    report = validate(system)
    band = _log_grid(args.freq[0], args.freq[1], args.points)

    # informational: asymmetry is a property, not a defect
    yield "structure", True, (
        f"symmetric {str(report.symmetric).lower()}, "
        f"index1 {str(report.index1).lower()}"
    )

    err = schur_equivalence_check(system, 1j * band)
    yield "schur_equivalence", err <= 1e-10, f"max rel mismatch {err:.3e}"

    probe = 0.5 + 2.0j
    A_t = assemble_shifted_augmented(system, probe, transposed=True)
    A = assemble_shifted_augmented(system, probe)
    diff = abs(A_t - A.T)
    diff = diff.max() if diff.nnz else 0.0
    yield "augmented_transpose", diff == 0.0, f"max entry diff {diff:.3e}"

    lu = factor(A)
    Pr, Pc = lu.permutation_matrices()
    residual = abs(Pr @ A @ Pc - lu.L @ lu.U).max()
    scale = max(1.0, abs(A).max())
    yield "factorization_identity", residual <= 1e-12 * scale, (
        f"|Pr A Pc - L U| = {residual:.3e}"
    )

    interp = irka.initial_interpolation(
        args.r, system.m, system.p, (args.freq[0], args.freq[1]), args.seed
    )
    basis = irka.build_bases(system, interp, one_sided=False)
    rom = irka.reduce(system, basis)
    worst_value = 0.0
    worst_deriv = 0.0
    for k, sigma in enumerate(interp.shifts):
        Gf = eval_full(system, sigma).G
        Gr = eval_reduced(rom, sigma).G
        scale = max(1.0, float(np.max(np.abs(Gf))))
        right = np.linalg.norm((Gf - Gr) @ interp.b[k]) / scale
        left = np.linalg.norm(interp.c[k] @ (Gf - Gr)) / scale
        worst_value = max(worst_value, right, left)
        dGf = oracle_finite_difference_derivative(lambda s: eval_full(system, s).G, sigma)
        dGr = oracle_finite_difference_derivative(lambda s: eval_reduced(rom, s).G, sigma)
        deriv = abs(interp.c[k] @ (dGf - dGr) @ interp.b[k]) / scale
        worst_deriv = max(worst_deriv, deriv)
    yield "hermite_values", worst_value <= 1e-8, f"worst tangential mismatch {worst_value:.3e}"
    yield "hermite_derivatives", worst_deriv <= 1e-6, f"worst derivative mismatch {worst_deriv:.3e}"

    if report.symmetric:
        basis1 = irka.build_bases(system, interp, one_sided=True)
        rom1 = irka.reduce(system, basis1)
        asym = max(
            float(np.max(np.abs(B - B.T))) / max(1.0, float(np.max(np.abs(B))))
            for B in (rom1.M, rom1.L, rom1.K)
        )
        pair = float(np.max(np.abs(rom1.H - rom1.F.T))) / max(
            1.0, float(np.max(np.abs(rom1.H)))
        )
        sym_ok = asym <= 1e-12 and pair <= 1e-12
        stab = stability_report(rom1)
        yield "symmetric_one_sided", sym_ok and stab.stable, (
            f"asymmetry {max(asym, pair):.3e}, stable {stab.stable}"
        )

    with tempfile.TemporaryDirectory() as tmp:
        manifest = save_system(system, tmp)
        loaded = load_system(manifest)
        exact = all(
            (abs(getattr(system, name) - getattr(loaded, name)).max() == 0.0
             if name in ("M11", "L11", "K11", "K12", "K21", "K22")
             else np.array_equal(getattr(system, name), getattr(loaded, name)))
            for name in ("M11", "L11", "K11", "K12", "K21", "K22",
                         "F1", "F2", "H1", "H2", "Da")
        )
    yield "save_load_roundtrip", exact, "all block entries reproduced exactly"


def cmd_verify(args):
    system = load_system(args.manifest)
    failures = 0
    for name, passed, detail in _verify_checks(system, args):
        status = "PASS" if passed else "FAIL"
        if not passed:
            failures += 1
        print(f"{status} {name}: {detail}")
    print(f"{'OK' if failures == 0 else 'FAILED'} ({failures} failing check(s))")
    return 0 if failures == 0 else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="morkit",
        description="Interpolatory model reduction for sparse second-order "
        "index-1 descriptor systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic benchmark system")
    gen.add_argument("--n1", type=_positive_int, required=True)
    gen.add_argument("--n2", type=_positive_int, required=True)
    gen.add_argument("--m", type=_positive_int, required=True)
    gen.add_argument("--p", type=_positive_int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--symmetric", action=argparse.BooleanOptionalAction, default=True)
    gen.add_argument("--damping", type=float, nargs=2, default=[0.5, 1e-4],
                     metavar=("ALPHA", "BETA"),
                     help="proportional damping L11 = ALPHA*M11 + BETA*K11")
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_generate)

    red = sub.add_parser("reduce", help="run the second-order IRKA reduction")
    red.add_argument("--manifest", required=True)
    red.add_argument("--r", type=_positive_int, default=None, help="reduced order")
    red.add_argument("--max-iter", dest="max_iter", type=_positive_int, default=None)
    red.add_argument("--shift-tol", dest="shift_tol", type=float, default=None)
    red.add_argument("--inner-max-iter", dest="inner_max_iter", type=_positive_int,
                     default=None)
    red.add_argument("--inner-tol", dest="inner_tol", type=float, default=None)
    red.add_argument("--freq-lo", dest="freq_lo", type=float, default=None)
    red.add_argument("--freq-hi", dest="freq_hi", type=float, default=None)
    red.add_argument("--seed", type=int, default=None)
    red.add_argument("--one-sided", dest="one_sided", choices=("auto", "on", "off"),
                     default=None)
    red.add_argument("--force-two-sided", dest="one_sided", action="store_const",
                     const="off", help="shorthand for --one-sided off")
    red.add_argument("--config", default=None, help="key = value settings file")
    red.add_argument("--timings", action="store_true",
                     help="include wall-clock lines in trace.log")
    red.add_argument("--index1-form", dest="index1_form", action="store_true",
                     help="also write the reduced model re-attached to the "
                     "original algebraic constraints")
    red.add_argument("--out", required=True)
    red.set_defaults(func=cmd_reduce)

    ana = sub.add_parser("analyze", help="frequency sweep and stability report")
    ana.add_argument("--manifest", required=True)
    ana.add_argument("--rom", required=True, help="directory written by reduce")
    ana.add_argument("--points", type=_positive_int, default=200)
    ana.add_argument("--freq", type=float, nargs=2, default=[10.0, 1e4],
                     metavar=("LO", "HI"))
    ana.add_argument("--channel", type=int, nargs=2, default=None,
                     metavar=("INPUT", "OUTPUT"))
    ana.add_argument("--benchmark", type=_positive_int, default=0,
                     help="also time full vs reduced sweeps (repetitions)")
    ana.add_argument("--workers", type=int, default=None,
                     help="parallel sweep workers (default: MORKIT_THREADS)")
    ana.add_argument("--out", required=True)
    ana.set_defaults(func=cmd_analyze)

    ver = sub.add_parser("verify", help="run the library invariants on a system")
    ver.add_argument("--manifest", required=True)
    ver.add_argument("--points", type=_positive_int, default=10)
    ver.add_argument("--r", type=_positive_int, default=4,
                     help="order for the interpolation spot-check")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--freq", type=float, nargs=2, default=[10.0, 1e4],
                     metavar=("LO", "HI"))
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MorkitError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
