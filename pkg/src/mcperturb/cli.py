"""Command-line front end: theta sweeps, queueing case studies, model dumps.

Subcommands: ``sweep``, ``queue-ssb``, ``queue-seb``, ``model``,
``stability``, ``plot``.  CSV output uses 17 significant digits with the
literal ``inf`` for inapplicable bounds, so identical configurations and
seeds reproduce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

import numpy as np

from .bounds import (
    BoundReport,
    CBound,
    PerturbationPair,
    ScaledPerturbation,
    cnb_bound,
    cnb_update,
    direct_bound,
    kappa3,
    kappa6,
    seb,
    ssb,
    stability_domain,
)
from .core import (
    McError,
    NoUniformColumn,
    Norm,
    StochasticMatrix,
    TabooNotProper,
    measure_norm,
    operator_norm,
    optimize_alpha,
)
from .models import (
    Exponential,
    AtomMixture,
    QueueSpec,
    mg1_breakdown_kernel,
    mg1_feasible_alpha_ceiling,
    mg1_ssb_bound,
    mg1_stability_lower_bound,
    random_chain,
    ring_kappa3,
    ring_kernel,
    star_closed_forms,
    star_kernel,
    two_state_closed_forms,
    two_state_kernel,
)
from .stationary import (
    auto_taboo,
    ergodic_decomposition,
    remove_column,
    stationary_distribution,
)

SWEEP_FAMILIES = ("cnb_k3", "cnb_k6", "cnb_update", "ssb", "db", "seb_1", "seb_2", "seb_3")
SWEEP_ETA_FAMILIES = ("cnb_k6", "ssb", "db", "seb_1", "seb_2", "seb_3")


def _fmt(x: float) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _parse_norm(args) -> Norm:
    if args.norm == "one":
        return Norm.one()
    if args.norm == "inf":
        return Norm.infinity()
    return Norm.v(args.alpha)


def _parse_orders(text: str) -> list[int]:
    try:
        orders = [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise McError(f"cannot parse orders {text!r}") from exc
    if not orders or any(k < 0 for k in orders):
        raise McError("orders must be a comma-separated list of nonnegative integers")
    return orders


def _parse_atoms(text: str) -> AtomMixture:
    points = []
    for tok in text.split(","):
        x, _, w = tok.partition(":")
        points.append((float(x), float(w)))
    return AtomMixture(tuple(points))


def _queue_spec(args, truncation: int) -> QueueSpec:
    if getattr(args, "atoms", None):
        service = _parse_atoms(args.atoms)
    else:
        service = Exponential(args.mu)
    return QueueSpec(args.lam, service, args.r, truncation)


def _build_pair(args) -> tuple[StochasticMatrix, StochasticMatrix]:
    """Base and perturbing kernels for the selected model."""
    model = args.model
    if model == "two-state":
        return two_state_kernel(args.p, args.q), two_state_kernel(args.pt, args.qt)
    if model == "ring":
        return ring_kernel(args.n, args.b), ring_kernel(args.n, args.bt)
    if model == "star":
        return (
            star_kernel(args.n, args.beta, args.gamma),
            star_kernel(args.n, args.betat, args.gammat),
        )
    if model == "random":
        return random_chain(args.n, args.seed), random_chain(args.n, args.seed + 1)
    if model == "mg1":
        spec = _queue_spec(args, args.trunc)
        return mg1_breakdown_kernel(spec, 0.0), mg1_breakdown_kernel(spec, 1.0)
    raise McError(f"unknown model {model!r}")


def _check_theta_grid(lo: float, hi: float, steps: int) -> None:
    if not (0.0 <= lo <= hi <= 1.0):
        raise McError("theta grid must satisfy 0 <= lo <= hi <= 1")
    if steps < 2:
        raise McError("theta grid needs at least two steps")


def cmd_sweep(args) -> int:
    _check_theta_grid(args.theta_lo, args.theta_hi, args.theta_steps)
    norm = _parse_norm(args)
    P, R = _build_pair(args)
    pair = PerturbationPair(P, R, norm)
    decomp = ergodic_decomposition(P)
    D, pi = decomp.deviation, decomp.pi
    k3 = kappa3(D)
    k6 = kappa6(D)
    taboo = None
    kappa_up = None
    try:
        _, taboo = auto_taboo(P)
        kappa_up = cnb_update(P, taboo)
    except (NoUniformColumn, TabooNotProper):
        pass
    pi_norm = measure_norm(pi, norm)
    c = CBound.for_norm(norm, args.cbound)
    thetas = np.linspace(args.theta_lo, args.theta_hi, args.theta_steps)

    header = (
        ["theta", "true_diff"]
        + list(SWEEP_FAMILIES)
        + [f"eta_{fam}" for fam in SWEEP_ETA_FAMILIES]
        + [f"{fam}_ok" for fam in SWEEP_FAMILIES]
    )
    rows = []
    for theta in thetas:
        pert = ScaledPerturbation(pair, float(theta))
        diff = np.asarray(stationary_distribution(pert.kernel())) - np.asarray(pi)
        reports = {
            "cnb_k3": cnb_bound(k3, pert, "cnb_k3"),
            "cnb_k6": cnb_bound(k6, pert, "cnb_k6"),
            "db": direct_bound(pert, D, pi=pi),
        }
        if kappa_up is not None:
            reports["cnb_update"] = cnb_bound(kappa_up, pert, "cnb_update")
        else:
            reports["cnb_update"] = BoundReport.inapplicable("cnb_update", -math.inf, Norm.infinity())
        if taboo is not None:
            reports["ssb"] = ssb(pert, taboo, pi_norm)
        else:
            reports["ssb"] = BoundReport.inapplicable("ssb", -math.inf, norm)
        for order in (1, 2, 3):
            reports[f"seb_{order}"] = seb(pert, D, order, c, pi=pi)

        row = [float(theta), measure_norm(diff, norm)]
        row += [reports[fam].value for fam in SWEEP_FAMILIES]
        for fam in SWEEP_ETA_FAMILIES:
            rep = reports[fam]
            truth = measure_norm(diff, rep.target)
            row.append((rep.value - truth) / truth if truth > 0.0 else math.inf)
        row += [int(reports[fam].applicable) for fam in SWEEP_FAMILIES]
        rows.append(row)

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) if isinstance(x, float) else str(x) for x in row])
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_queue_ssb(args) -> int:
    """Weight-base-optimized strong-stability bound on the overflow reward gap."""
    _check_theta_grid(args.theta_lo, args.theta_hi, args.theta_steps)
    spec = _queue_spec(args, args.trunc)
    if not isinstance(spec.service, Exponential):
        raise McError("the analytic queue bound needs exponential service")
    ceiling = mg1_feasible_alpha_ceiling(args.lam, args.mu, args.r)
    alpha_hi = min(args.alpha_hi, ceiling) if args.alpha_hi else ceiling
    alpha_hi *= 1.0 - 1e-9
    P0 = mg1_breakdown_kernel(spec, 0.0)
    pi0 = np.asarray(stationary_distribution(P0))
    f = (np.arange(spec.truncation + 1) > 2).astype(float)
    base_reward = float(pi0 @ f)
    thetas = np.linspace(args.theta_lo, args.theta_hi, args.theta_steps)

    rows = []
    for theta in thetas:
        pi_theta = np.asarray(stationary_distribution(mg1_breakdown_kernel(spec, float(theta))))
        truth = abs(float(pi_theta @ f) - base_reward)

        def reward_bound(alpha: float, theta=float(theta)) -> float:
            report = mg1_ssb_bound(args.lam, args.mu, args.r, alpha, theta)
            return report.value / alpha**3  # ||f||_v = alpha^-3 for the >2 indicator

        alpha_star, value = optimize_alpha(reward_bound, 1.0, alpha_hi, args.alpha_steps)
        rows.append([float(theta), truth, value, alpha_star])

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta", "true_gap", "ssb_bound", "alpha_star"])
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_queue_seb(args) -> int:
    """Series-expansion bounds on the overflow reward gap of the truncated queue."""
    spec = _queue_spec(args, args.trunc)
    orders = _parse_orders(args.orders)
    P0 = mg1_breakdown_kernel(spec, 0.0)
    P1 = mg1_breakdown_kernel(spec, 1.0)
    norm = Norm.v(args.alpha)
    decomp = ergodic_decomposition(P0)
    D, pi0 = decomp.deviation, decomp.pi
    gain = operator_norm((P1.a - P0.a) @ D, norm)
    print(f"norm((P1 - P0) D0) = {_fmt(gain)}")
    if args.theta0 * gain >= 1.0:
        print(
            f"error: theta0 = {args.theta0:g} violates theta0 * {gain:.6g} < 1",
            file=sys.stderr,
        )
        return 2
    pair = PerturbationPair(P0, P1, norm)
    c = CBound.for_norm(norm, args.cbound)
    f = (np.arange(spec.truncation + 1) > 2).astype(float)
    f_norm = max(f[i] / norm.alpha**i for i in range(len(f)))
    base_reward = float(np.asarray(pi0) @ f)
    thetas = np.linspace(args.theta0 / args.theta_steps, args.theta0, args.theta_steps)

    header = ["theta", "true_gap"]
    header += [f"seb_{k}" for k in orders]
    header += [f"relerr_{k}" for k in orders]
    rows = []
    for theta in thetas:
        pert = ScaledPerturbation(pair, float(theta))
        pi_theta = np.asarray(stationary_distribution(pert.kernel()))
        truth = abs(float(pi_theta @ f) - base_reward)
        bounds = [seb(pert, D, k, c, pi=pi0).value * f_norm for k in orders]
        rels = [abs(b - truth) / truth if truth > 0.0 else math.inf for b in bounds]
        rows.append([float(theta), truth] + bounds + rels)

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _matrix_lines(name: str, M: np.ndarray) -> list[str]:
    lines = [f"{name} ="]
    for row in np.asarray(M):
        lines.append("  " + " ".join(_fmt(x) for x in row))
    return lines


def cmd_model(args) -> int:
    """Dump kernel, stationary distribution, deviation matrix, and diagnostics."""
    model = args.model
    if model == "two-state":
        P = two_state_kernel(args.p, args.q)
        forms = two_state_closed_forms(args.p, args.q)
        k3, k6 = forms.kappa3, forms.kappa6
    elif model == "ring":
        P = ring_kernel(args.n, args.b)
        k3 = ring_kappa3(args.n, args.b)
        k6 = None
    elif model == "star":
        P = star_kernel(args.n, args.beta, args.gamma)
        forms = star_closed_forms(args.n, args.beta, args.gamma)
        k3, k6 = forms.kappa3, forms.kappa6
    elif model == "random":
        P = random_chain(args.n, args.seed)
        k3 = k6 = None
    elif model == "mg1":
        P = mg1_breakdown_kernel(_queue_spec(args, args.trunc), args.theta)
        k3 = k6 = None
    else:
        raise McError(f"unknown model {model!r}")

    decomp = ergodic_decomposition(P)
    if k3 is None:
        k3 = kappa3(decomp.deviation)
    if k6 is None:
        k6 = kappa6(decomp.deviation)
    vnorm = Norm.v(args.alpha)
    row_removed = P.a.copy()
    row_removed[0, :] = 0.0
    col_removed = remove_column(P, 0)

    lines = [f"model = {model}", f"n = {P.n}"]
    lines.append(f"kappa3 = {_fmt(kappa3(decomp.deviation))}")
    lines.append(f"kappa6 = {_fmt(kappa6(decomp.deviation))}")
    lines.append(f"kappa3_closed_form = {_fmt(k3)}")
    lines.append(f"kappa6_closed_form = {_fmt(k6)}")
    lines.append(f"taboo_row0_vnorm = {_fmt(operator_norm(row_removed, vnorm))}")
    lines.append(f"taboo_col0_vnorm = {_fmt(operator_norm(col_removed, vnorm))}")
    lines.append(f"taboo_row0_onenorm = {_fmt(operator_norm(row_removed, Norm.one()))}")
    lines.append(f"taboo_col0_onenorm = {_fmt(operator_norm(col_removed, Norm.one()))}")
    lines.append("pi = " + " ".join(_fmt(x) for x in np.asarray(decomp.pi)))
    lines += _matrix_lines("P", P.a)
    lines += _matrix_lines("D", decomp.deviation)
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote model dump to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_stability(args) -> int:
    """Certified theta range below which the mixed kernel stays uniquely stationary."""
    if args.model == "mg1":
        value = mg1_stability_lower_bound(args.lam, args.mu, args.r, args.alpha_hi)
    else:
        norm = _parse_norm(args)
        P, R = _build_pair(args)
        taboo_norm = operator_norm(remove_column(P, args.state), norm)
        diff_norm = operator_norm(R.a - P.a, norm)
        value = stability_domain(taboo_norm, diff_norm)
    print(_fmt(value))
    return 0


def cmd_plot(args) -> int:
    """Render CSV columns as a self-contained SVG line chart."""
    with open(args.csv, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            print(f"error: {args.csv} is empty", file=sys.stderr)
            return 2
        data = list(reader)
    if not data:
        print(f"error: {args.csv} has no data rows", file=sys.stderr)
        return 2
    columns = [tok.strip() for tok in args.columns.split(",") if tok.strip()]
    missing = [c for c in [args.x] + columns if c not in data[0]]
    if missing:
        print(f"error: missing columns {missing} in {args.csv}", file=sys.stderr)
        return 2

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    x = np.array([float(row[args.x]) for row in data])
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for name in columns:
        y = np.array([float(row[name]) for row in data])
        mask = np.isfinite(y)
        if args.loglog:
            mask &= (y > 0) & (x > 0)
        ax.plot(x[mask], y[mask], label=name)
    if args.loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(args.x)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, format="svg")
    plt.close(fig)
    print(f"wrote {args.out}")
    return 0


def _add_model_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--model",
        required=True,
        choices=["two-state", "ring", "star", "random", "mg1"],
        help="model selector",
    )
    parser.add_argument("--p", type=float, default=0.3, help="two-state: 0 -> 1 rate of P")
    parser.add_argument("--q", type=float, default=0.2, help="two-state: 1 -> 0 rate of P")
    parser.add_argument("--pt", type=float, default=0.4, help="two-state: 0 -> 1 rate of R")
    parser.add_argument("--qt", type=float, default=0.3, help="two-state: 1 -> 0 rate of R")
    parser.add_argument("--n", type=int, default=10, help="ring/star/random: state count")
    parser.add_argument("--b", type=float, default=0.25, help="ring: hop probability of P")
    parser.add_argument("--bt", type=float, default=0.35, help="ring: hop probability of R")
    parser.add_argument("--beta", type=float, default=0.5, help="star: hub exit rate of P")
    parser.add_argument("--gamma", type=float, default=0.5, help="star: leaf hold rate of P")
    parser.add_argument("--betat", type=float, default=0.6, help="star: hub exit rate of R")
    parser.add_argument("--gammat", type=float, default=0.4, help="star: leaf hold rate of R")
    parser.add_argument("--lam", type=float, default=0.5, help="queue: arrival rate")
    parser.add_argument("--mu", type=float, default=1.0, help="queue: exponential service rate")
    parser.add_argument("--r", type=float, default=1.0, help="queue: repair rate")
    parser.add_argument("--atoms", type=str, default=None, help="queue: atoms 'x:w,x:w' instead of exponential service")
    parser.add_argument("--trunc", type=int, default=50, help="queue: truncation level N")


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--norm", choices=["one", "inf", "v"], default="inf", help="norm family")
    parser.add_argument("--alpha", type=float, default=1.0, help="v-norm weight base")
    parser.add_argument("--seed", type=int, default=0, help="seed for random models")
    parser.add_argument("--config", type=str, default=None, help="key=value defaults file; flags override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcperturb",
        description="Perturbation bounds and stability certificates for Markov chains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="bounds and relative errors over a theta grid")
    _add_model_arguments(p_sweep)
    _add_common_arguments(p_sweep)
    p_sweep.add_argument("--theta-lo", type=float, default=0.01)
    p_sweep.add_argument("--theta-hi", type=float, default=1.0)
    p_sweep.add_argument("--theta-steps", type=int, default=100)
    p_sweep.add_argument("--cbound", type=float, default=None, help="stationary-norm bound for v-norm remainders")
    p_sweep.add_argument("--out", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_qssb = sub.add_parser("queue-ssb", help="alpha-optimized queue bound vs truncated truth")
    _add_common_arguments(p_qssb)
    p_qssb.add_argument("--lam", type=float, default=0.5)
    p_qssb.add_argument("--mu", type=float, default=1.0)
    p_qssb.add_argument("--r", type=float, default=1.0)
    p_qssb.add_argument("--trunc", type=int, default=200, help="truncation for the reference solve")
    p_qssb.add_argument("--theta-lo", type=float, default=0.0)
    p_qssb.add_argument("--theta-hi", type=float, default=0.01)
    p_qssb.add_argument("--theta-steps", type=int, default=21)
    p_qssb.add_argument("--alpha-hi", type=float, default=None)
    p_qssb.add_argument("--alpha-steps", type=int, default=201)
    p_qssb.add_argument("--out", required=True)
    p_qssb.set_defaults(func=cmd_queue_ssb)

    p_qseb = sub.add_parser("queue-seb", help="series bounds and relative errors for the truncated queue")
    _add_common_arguments(p_qseb)
    p_qseb.add_argument("--lam", type=float, default=0.5)
    p_qseb.add_argument("--mu", type=float, default=1.0)
    p_qseb.add_argument("--r", type=float, default=1.0)
    p_qseb.add_argument("--atoms", type=str, default=None)
    p_qseb.add_argument("--trunc", type=int, default=50)
    p_qseb.add_argument("--theta0", type=float, default=0.1)
    p_qseb.add_argument("--theta-steps", type=int, default=25)
    p_qseb.add_argument("--orders", type=str, default="1,2,3")
    p_qseb.add_argument("--cbound", type=float, default=None)
    p_qseb.add_argument("--out", required=True)
    p_qseb.set_defaults(func=cmd_queue_seb)

    p_model = sub.add_parser("model", help="dump kernel, pi, deviation matrix, taboo norms")
    _add_model_arguments(p_model)
    _add_common_arguments(p_model)
    p_model.add_argument("--theta", type=float, default=0.0, help="mg1: breakdown probability")
    p_model.add_argument("--out", default=None)
    p_model.set_defaults(func=cmd_model)

    p_stab = sub.add_parser("stability", help="certified stability domain of the mix")
    _add_model_arguments(p_stab)
    _add_common_arguments(p_stab)
    p_stab.add_argument("--state", type=int, default=0, help="taboo state for finite models")
    p_stab.add_argument("--alpha-hi", type=float, default=None, help="mg1: weight-base grid cap")
    p_stab.set_defaults(func=cmd_stability)

    p_plot = sub.add_parser("plot", help="render CSV columns to an SVG line chart")
    p_plot.add_argument("csv")
    p_plot.add_argument("--columns", required=True, help="comma-separated y columns")
    p_plot.add_argument("--x", default="theta")
    p_plot.add_argument("--loglog", action="store_true")
    p_plot.add_argument("--out", required=True)
    p_plot.set_defaults(func=cmd_plot)

    return parser


def _read_config(path: str) -> list[str]:
    """Turn 'key = value' lines into flags injected ahead of user arguments."""
    flags: list[str] = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not key or not value:
                raise McError(f"cannot parse config line {raw.rstrip()!r}")
            flags += [f"--{key}", value]
    return flags


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # config acts as defaults: inject right after the subcommand so explicit
    # flags, parsed later, win
    if "--config" in argv:
        at = argv.index("--config")
        if at + 1 >= len(argv):
            print("error: --config needs a path", file=sys.stderr)
            return 2
        try:
            injected = _read_config(argv[at + 1])
        except (OSError, McError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        argv = argv[:1] + injected + argv[1:]
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except McError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry_point() -> None:  # pragma: no cover - console-script shim
    raise SystemExit(main())


if __name__ == "__main__":  # pragma: no cover
    entry_point()
