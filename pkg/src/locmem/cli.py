"""Command-line interface.

Exit codes: 0 success (possibly with flagged u), 2 configuration error,
3 data error, 4 numerical precision error.
"""
import argparse
import json
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from ._accel import default_threads
from .asymptotics import variance_report
from .errors import ConfigurationError, LocmemError
from .estimator import advise_tuning, estimate, make_scheme, ols_regression_weights
from .io import read_series, write_rows
from .scalogram import default_grid, dwt, local_scalogram
from .simulate import MemoryCurve, TvArfimaModel, TvFgnModel, simulate
from .wavelets import get_bank

# config-file keys that differ from argparse destinations
CONFIG_ALIASES = {
    "weights.kind": "weights",
    "weights.bandwidth": "bandwidth",
    "weights.kernel": "kernel",
    "estimate.level": "level",
    "grid.size": "grid",
    "wavelet.order": "wavelet",
}

DEFAULTS = {
    "weights": "kernel",
    "bandwidth": 0.25,
    "kernel": "rectangle",
    "level": 0.95,
    "grid": 100,
    "wavelet": 2,
    "scales": None,
    "seed": 0,
    "T": 4096,
    "threads": None,
}


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[CONFIG_ALIASES.get(key, key).replace(".", "_")] = value
    return out


def _resolve(args, name, cast=None):
    """Flag value, else config value, else built-in default."""
    val = getattr(args, name, None)
    if val is None:
        val = args.config_values.get(name)
    if val is None:
        val = DEFAULTS.get(name)
    if val is not None and cast is not None:
        try:
            val = cast(val)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"invalid value {val!r} for {name}") from exc
    return val


def parse_curve(text):
    """Parameter-curve preset.

    ``constant:V`` or a bare number, ``cosine`` or ``cosine:A`` for
    ``A (1 - cos(pi u / 2))`` (A defaults to 1/3), ``linear:A,B`` for
    ``A + (B - A) u``, and ``piecewise:V0,V1,...@B1,...`` for a step function.
    """
    text = str(text).strip()
    kind, _, rest = text.partition(":")
    try:
        if kind == "constant":
            return MemoryCurve.constant(float(rest))
        if kind == "cosine":
            return MemoryCurve.cosine_ramp(float(rest) if rest else 1.0 / 3.0)
        if kind == "linear":
            a, b = (float(x) for x in rest.split(","))
            return MemoryCurve(lambda u: a + (b - a) * np.asarray(u), (min(a, b), max(a, b)),
                               abs(b - a), f"linear({a:g},{b:g})")
        if kind == "piecewise":
            vals, _, brk = rest.partition("@")
            return MemoryCurve.piecewise([float(x) for x in vals.split(",")],
                                         [float(x) for x in brk.split(",")] if brk else [])
        return MemoryCurve.constant(float(text))
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse curve {text!r}: {exc}") from exc


def parse_floats(text):
    if text is None or str(text).strip() == "":
        return ()
    try:
        return tuple(float(x) for x in str(text).split(","))
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse {text!r} as a list of numbers") from exc


def parse_scale_range(text):
    """``"1..5"`` or ``"3"`` to a tuple of scales."""
    text = str(text)
    try:
        if ".." in text:
            a, b = (int(x) for x in text.split(".."))
            return tuple(range(a, b + 1))
        return (int(text),)
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse scale range {text!r}") from exc


def parse_plan_scales(text):
    """``"L:ell"`` to ``(L, ell)``."""
    try:
        L, ell = (int(x) for x in str(text).split(":"))
    except ValueError as exc:
        raise ConfigurationError(f"expected L:ell, got {text!r}") from exc
    return L, ell


def parse_d_grid(text):
    """``"0,0.2,0.4"`` or ``"start:stop:step"`` (inclusive)."""
    text = str(text)
    if text.count(":") == 2:
        a, b, s = (float(x) for x in text.split(":"))
        return tuple(np.round(np.arange(a, b + s / 2, s), 12))
    return parse_floats(text)


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    try:
        return open(path, "w", newline=""), True
    except OSError as exc:
        raise ConfigurationError(f"cannot write {path}: {exc}") from exc


def _write_csv(path, header, rows):
    fh, close = _open_out(path)
    try:
        write_rows(fh, header, rows)
    finally:
        if close:
            fh.close()


def dump_filters(path, bank, J):
    rows = []
    for f in bank.filters(J):
        for lag, tap in zip(f.lags(), f.taps):
            rows.append((f.j, int(lag), float(tap)))
    _write_csv(path, ["j", "lag", "tap"], rows)


# --------------------------------------------------------------------------
# subcommands


def _build_model(args):
    p = int(args.p or 0)
    if args.model == "tvfgn":
        if p:
            raise ConfigurationError("tvFGN has p = 0")
        return TvFgnModel(parse_curve(args.hurst or "constant:0.7"))
    return TvArfimaModel(
        parse_curve(args.memory or "cosine"),
        ar=parse_floats(args.ar),
        ma=parse_floats(args.ma),
        sigma=float(args.sigma),
        p=p,
    )


def cmd_simulate(args):
    model = _build_model(args)
    T = _resolve(args, "T", int)
    seed = _resolve(args, "seed", int)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        path = simulate(model, T, seed, noise=args.noise, n_trunc=args.truncation)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _write_csv(args.out, ["x"], ((float(v),) for v in path.values))
    return 0


def _scheme_from_args(args):
    return make_scheme(_resolve(args, "weights"), _resolve(args, "bandwidth", float),
                       _resolve(args, "kernel"))


def cmd_scalogram(args):
    x = read_series(args.input)
    bank = get_bank(_resolve(args, "wavelet", int))
    scales = parse_scale_range(_resolve(args, "scales") or "1..5")
    scheme = _scheme_from_args(args)
    if args.dump_filters:
        dump_filters(args.dump_filters, bank, max(scales))
    pyr = dwt(x, bank, max(scales))
    sc = local_scalogram(pyr, scheme, default_grid(_resolve(args, "grid", int)), scales)
    rows = []
    for i, u in enumerate(sc.u):
        if not sc.valid[i]:
            continue
        for s, j in enumerate(sc.scales):
            rows.append((float(u), j, float(sc.values[s, i])))
    _write_csv(args.out, ["u", "j", "sigma2"], rows)
    if np.any(sc.zero_mask):
        print("warning: zero scalogram values at some u", file=sys.stderr)
    return 0


def run_estimate(x, L, ell, scheme, bank, grid, level, ci=True):
    return estimate(x, L, ell, weights=scheme, wavelet=bank, u_grid=default_grid(grid),
                    level=level, ci=ci)


def cmd_estimate(args):
    x = read_series(args.input)
    bank = get_bank(_resolve(args, "wavelet", int))
    L, ell = parse_plan_scales(_resolve(args, "scales") or "2:2")
    scheme = _scheme_from_args(args)
    if args.dump_filters:
        dump_filters(args.dump_filters, bank, L + ell)
    est, _ = run_estimate(x, L, ell, scheme, bank, _resolve(args, "grid", int),
                          _resolve(args, "level", float), ci=not args.no_ci)
    _write_csv(args.out, ["u", "d_hat", "se", "ci_lo", "ci_hi", "flags"], est.rows())
    n_zero = sum("zero_scalogram" in f for f in est.flags)
    if n_zero:
        print(f"warning: {n_zero} u-points have zero scalogram values; no estimate there",
              file=sys.stderr)
    return 0


def cmd_asymptotics(args):
    bank = get_bank(_resolve(args, "wavelet", int))
    scheme = _scheme_from_args(args)
    w = ols_regression_weights(args.ell).w
    reports = [variance_report(d, args.ell, w, scheme, bank) for d in parse_d_grid(args.d)]
    if args.format == "json":
        payload = [
            {"d": r.d, "K": r.K_value, "V": r.V_value, "Sigma": r.Sigma.tolist(),
             "scheme": r.scheme_tag, "w": list(r.w)}
            for r in reports
        ]
        fh, close = _open_out(args.out)
        try:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
        finally:
            if close:
                fh.close()
        return 0
    n = args.ell + 1
    header = ["d", "K", "V"] + [f"Sigma_{i}_{k}" for i in range(n) for k in range(n)]
    rows = [[r.d, r.K_value, r.V_value] + [float(v) for v in r.Sigma.ravel()] for r in reports]
    _write_csv(args.out, header, rows)
    return 0


def cmd_advise(args):
    adv = advise_tuning(args.T, args.d_prior, args.beta, args.p, args.ell,
                        get_bank(_resolve(args, "wavelet", int)))
    rows = [
        ("L", adv.L), ("bandwidth", adv.bandwidth), ("rate_exponent", adv.rate_exponent),
        ("L_formula", adv.L_formula), ("bandwidth_formula", adv.bandwidth_formula),
        ("adjusted", int(adv.adjusted)),
    ]
    _write_csv(args.out, ["key", "value"], rows)
    return 0


def _benchmark_one(seed, model, T, scales_by_L, schemes, bank, grid, level):
    x = simulate(model, T, seed).values
    out = []
    for kind, scheme in schemes.items():
        for L in scales_by_L:
            est, sc = run_estimate(x, L, 2, scheme, bank, grid, level)
            out.append((kind, L, est, sc))
    return out


def cmd_reproduce(args):
    """Tabulate accuracy of the local estimator on the tvARFIMA(1,d,0) benchmark."""
    T = args.T
    bank = get_bank(2)
    model = TvArfimaModel(MemoryCurve.cosine_ramp(), ar=(0.8,), sigma=1.0)
    schemes = {
        "kernel": make_scheme("kernel", args.bandwidth),
        "recursive": make_scheme("recursive", args.bandwidth),
    }
    if args.weights != "both":
        schemes = {args.weights: schemes[args.weights]}
    Ls = (1, 2, 3)
    threads = args.threads or default_threads()
    seeds = list(range(args.seed, args.seed + args.seeds))
    job = lambda s: _benchmark_one(s, model, T, Ls, schemes, bank, args.grid, 0.95)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(job, seeds))
    else:
        results = [job(s) for s in seeds]

    os.makedirs(args.out_dir, exist_ok=True)
    curve_rows, scal_rows = [], []
    stats = {}
    for seed, res in zip(seeds, results):
        for kind, L, est, sc in res:
            d_true = model.d(est.u)
            for k in range(est.u.size):
                if not np.isfinite(est.d_hat[k]):
                    continue
                curve_rows.append((seed, kind, L, float(est.u[k]), float(d_true[k]),
                                   float(est.d_hat[k]), float(est.ci_lo[k]),
                                   float(est.ci_hi[k])))
            sel = (est.u >= 0.2) & (est.u <= 0.8) & np.isfinite(est.d_hat)
            err = est.d_hat[sel] - d_true[sel]
            cover = (est.ci_lo[sel] <= d_true[sel]) & (d_true[sel] <= est.ci_hi[sel])
            s = stats.setdefault((kind, L), {"abs": [], "bias": [], "cover": [], "width": []})
            s["abs"].append(np.mean(np.abs(err)))
            s["bias"].append(np.mean(err))
            s["cover"].append(np.mean(cover))
            s["width"].append(np.nanmean(est.ci_hi[sel] - est.ci_lo[sel]))
        if seed == seeds[0]:
            x = simulate(model, T, seed).values
            pyr = dwt(x, bank, 5)
            for kind, scheme in schemes.items():
                sc = local_scalogram(pyr, scheme, default_grid(args.grid), range(1, 6))
                for i, u in enumerate(sc.u):
                    if sc.valid[i]:
                        for s_idx, j in enumerate(sc.scales):
                            scal_rows.append((kind, j, float(u), float(sc.values[s_idx, i])))
    _write_csv(os.path.join(args.out_dir, "curves.csv"),
               ["seed", "weights", "L", "u", "d_true", "d_hat", "ci_lo", "ci_hi"], curve_rows)
    _write_csv(os.path.join(args.out_dir, "scalograms.csv"),
               ["weights", "j", "u", "sigma2"], scal_rows)
    summary = []
    for (kind, L), s in sorted(stats.items()):
        summary.append((kind, L, float(np.mean(s["abs"])), float(np.mean(s["bias"])),
                        float(np.mean(s["cover"])), float(np.mean(s["width"])), len(s["abs"])))
    _write_csv(os.path.join(args.out_dir, "summary.csv"),
               ["weights", "L", "mae", "bias", "coverage", "mean_ci_width", "n_seeds"], summary)
    for row in summary:
        print(f"{row[0]:>9} L={row[1]}  mae={row[2]:.4f}  bias={row[3]:+.4f}  "
              f"coverage={row[4]:.3f}", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# parser


def _add_weight_flags(p):
    p.add_argument("--weights", choices=["kernel", "recursive"], default=None,
                   help="localization weights (default kernel)")
    p.add_argument("--bandwidth", type=float, default=None,
                   help="bandwidth b, fraction of coefficients per window (default 0.25)")
    p.add_argument("--kernel", default=None,
                   help="'rectangle' or 'file:<taps.csv>' for a tabulated kernel")
    p.add_argument("--wavelet", type=int, default=None,
                   help="Daubechies order, 1 (Haar) to 10 (default 2)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="locmem",
        description="Estimate a time-varying long-memory parameter with local wavelet "
                    "scalograms.",
    )
    parser.add_argument("--version", action="version", version=f"locmem {__version__}")
    parser.add_argument("--config", help="flat key = value file with default settings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a locally stationary long-memory series")
    p.add_argument("--model", choices=["tvarfima", "tvfgn"], default="tvarfima")
    p.add_argument("--memory", help="d(u) curve: constant:V, cosine[:A], linear:A,B, "
                                    "piecewise:V0,V1@B1 (default cosine)")
    p.add_argument("--hurst", help="H(u) curve for tvfgn (same syntax, default constant:0.7)")
    p.add_argument("--ar", help="comma-separated AR coefficients")
    p.add_argument("--ma", help="comma-separated MA coefficients")
    p.add_argument("--sigma", type=float, default=1.0, help="innovation scale")
    p.add_argument("-p", type=int, default=0, help="differencing order")
    p.add_argument("-T", type=int, default=None, help="sample size (default 4096)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--noise", choices=["gaussian", "uniform", "student"], default="gaussian")
    p.add_argument("--truncation", type=int, default=4096, help="MA truncation lag N")
    p.add_argument("--out", default=None, help="output CSV (default stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scalogram", help="local scalograms of a series")
    p.add_argument("input", help="CSV with one value per line")
    p.add_argument("--scales", default=None, help="scale range a..b (default 1..5)")
    p.add_argument("--grid", type=int, default=None, help="number of u points (default 100)")
    _add_weight_flags(p)
    p.add_argument("--dump-filters", default=None, help="write the scale filters to this CSV")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_scalogram)

    p = sub.add_parser("estimate", help="estimate d(u) with confidence intervals")
    p.add_argument("input", help="CSV with one value per line")
    p.add_argument("--scales", default=None, help="L:ell, lowest scale and extra scales "
                                                  "(default 2:2)")
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--level", type=float, default=None, help="confidence level (default 0.95)")
    p.add_argument("--no-ci", action="store_true", help="skip confidence intervals")
    _add_weight_flags(p)
    p.add_argument("--dump-filters", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("asymptotics", help="tabulate K(d), Sigma and the limit variance")
    p.add_argument("--d", default="0:0.4:0.1", help="d values: list or start:stop:step")
    p.add_argument("--ell", type=int, default=2)
    _add_weight_flags(p)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_asymptotics)

    p = sub.add_parser("advise", help="suggest the lowest scale L and bandwidth b")
    p.add_argument("-T", type=int, required=True)
    p.add_argument("--d-prior", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("-p", type=int, default=0)
    p.add_argument("--ell", type=int, default=2)
    p.add_argument("--wavelet", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_advise)

    p = sub.add_parser(
        "reproduce-sec51",
        help="simulation study: tvARFIMA(1,d,0) with d(u)=(1-cos(pi u/2))/3, AR 0.8",
        description="Simulate the tvARFIMA(1,d,0) benchmark (T=4096, AR coefficient 0.8, "
                    "d(u) = (1 - cos(pi u / 2)) / 3), estimate d(u) with scales L=1,2,3 and "
                    "ell=2 for both weight families, and write per-u curves, scalograms "
                    "and a summary table (MAE, bias, CI coverage on u in [0.2, 0.8]).",
    )
    p.add_argument("--seeds", type=int, default=20, help="number of simulated paths")
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("-T", type=int, default=4096)
    p.add_argument("--bandwidth", type=float, default=0.25)
    p.add_argument("--weights", choices=["kernel", "recursive", "both"], default="both")
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default LOCMEM_THREADS or 1)")
    p.add_argument("--out-dir", default="reproduce-out")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.config_values = read_config(args.config) if args.config else {}
        return args.func(args)
    except LocmemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
