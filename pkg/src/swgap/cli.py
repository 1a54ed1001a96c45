"""Command-line entry point: ``swgap {gap,certify,sample,dual,matrix-export}``.

Exit codes: 0 success, 1 certification failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import certify as cert
from .duality import dual_p
from .graph import build_dual
from .kernels import KINDS, KernelSpec, build_matrix, stationary_measure
from .measures import EnumerationTooLarge, ModelParams
from .spectral import SpectralInputError, spectral_gap

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _graph_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", help="family:size, e.g. tree:5, cycle:4, square:3, dual_square:3")
    src.add_argument("--graph", help="path to a graph JSON file")


def _param_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--q", type=float, required=True)
    coupling = p.add_mutually_exclusive_group(required=True)
    coupling.add_argument("--p", type=float)
    coupling.add_argument("--beta", type=float)
    p.add_argument("--real-q", action="store_true", help="allow non-integer q (bond side only)")


def _load_graph(args):
    return cert.resolve_graph(args.graph if args.graph else args.builtin)


def _params(args) -> ModelParams:
    if args.p is not None:
        return ModelParams.from_p(args.q, args.p, real_q=args.real_q)
    return ModelParams.from_beta(args.q, args.beta, real_q=args.real_q)


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="swgap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gap", help="spectral gap of one kernel")
    _graph_args(g)
    _param_args(g)
    g.add_argument("--kernel", choices=KINDS, required=True)
    g.add_argument("--pinned", type=int)
    g.add_argument("--lazy", action="store_true")
    g.add_argument("--tmix", action="store_true", help="also compute the exact mixing time")
    g.add_argument("--output")

    c = sub.add_parser("certify", help="run the certification battery")
    c.add_argument("--suite", help="suite JSON; the default battery otherwise")
    c.add_argument("--filter", action="append", default=[],
                   help=f"comma-separated families to keep: {', '.join(cert.FAMILIES)}")
    c.add_argument("--output")
    c.add_argument("--workers", type=int)
    c.add_argument("--slack", type=float)
    c.add_argument("--identity-tol", type=float)
    c.add_argument("--eigen-tol", type=float)
    c.add_argument("--list", action="store_true", help="print the cases and exit")

    s = sub.add_parser("sample", help="run a sampler")
    _graph_args(s)
    _param_args(s)
    s.add_argument("--kernel", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--burn-in", type=int, default=0)
    s.add_argument("--thinning", type=int, default=1)
    s.add_argument("--observables", default=None, help="comma-separated; defaults depend on the kernel")
    s.add_argument("--initial", choices=("ordered", "random"), default="ordered")
    s.add_argument("--pinned", type=int)
    s.add_argument("--stream", type=int, default=0)
    s.add_argument("--output", help="CSV path (stdout if omitted)")
    s.add_argument("--summary", help="JSON summary path")
    s.add_argument("--compare-exact", action="store_true", help="print TV and chi-square p-value against the exact law")

    d = sub.add_parser("dual", help="plane dual of an embedded graph")
    _graph_args(d)
    d.add_argument("--q", type=float)
    d.add_argument("--p", type=float)
    d.add_argument("--output")

    x = sub.add_parser("matrix-export", help="write a transition matrix")
    _graph_args(x)
    _param_args(x)
    x.add_argument("--kernel", choices=KINDS, required=True)
    x.add_argument("--pinned", type=int)
    x.add_argument("--lazy", action="store_true")
    x.add_argument("--format", choices=("csv", "npy"), default="csv")
    x.add_argument("--output", required=True)
    return parser


def _matrix(args):
    g, _ = _load_graph(args)
    prm = _params(args)
    prm.require_open()
    spec = KernelSpec(args.kernel, prm, g, args.pinned, args.lazy)
    return spec, build_matrix(spec)


def cmd_gap(args) -> int:
    spec, tm = _matrix(args)
    report = spectral_gap(tm, with_tmix=args.tmix)
    out = {"graph": spec.graph.name, "kernel": spec.kind, "lazy": spec.lazy, "params": spec.params.to_json(),
           "report": report.to_json()}
    _emit(cert.dumps(out), args.output)
    return EXIT_OK


def cmd_certify(args) -> int:
    if args.suite:
        cases, tol, name = cert.load_suite(args.suite)
    else:
        cases, tol, name = cert.default_battery(), {}, "default"
    selected = [f.strip() for item in args.filter for f in item.split(",") if f.strip()]
    try:
        cases = cert.filter_cases(cases, selected)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    for key, flag in (("slack", args.slack), ("identity", args.identity_tol), ("eigenvalue", args.eigen_tol)):
        if flag is not None:
            tol[key] = flag
    if args.list:
        _emit(cert.dumps([c.to_json() for c in cases]), args.output)
        return EXIT_OK
    suite = cert.run_suite(cases, tol, args.workers, name)
    _emit(suite.dumps(), args.output)
    for f in suite.failures():
        print(f"FAIL [{f['family']}] {f['check']} :: {f['case']} (lhs={f['lhs']!r}, rhs={f['rhs']!r})", file=sys.stderr)
    return EXIT_OK if suite.passed else EXIT_FAIL


def cmd_sample(args) -> int:
    from .sampler import POTTS_OBSERVABLES, RC_OBSERVABLES, ChainRun, empirical_vs_exact, run_chain

    g, _ = _load_graph(args)
    prm = _params(args)
    on_bonds = args.kernel in ("sw_rc", "sb_rc", "hb_rc", "metropolis_sb")
    if args.observables is None:
        if on_bonds:
            obs = RC_OBSERVABLES
        elif args.kernel == "sw_potts":
            obs = POTTS_OBSERVABLES
        else:
            obs = ("agreement_count", "color_histogram")
    else:
        obs = tuple(o.strip() for o in args.observables.split(",") if o.strip())
    run = ChainRun(g, args.kernel, prm, args.seed, args.samples, args.burn_in, args.thinning, obs,
                   initial=args.initial, pinned_vertex=args.pinned, stream=args.stream)
    if args.compare_exact:
        kind = "hb_potts" if args.kernel == "hb_potts_pinned" else args.kernel
        exact = stationary_measure(KernelSpec(kind, prm, g))
        tv, pval = empirical_vs_exact(run, exact)
        _emit(cert.dumps({"graph": g.name, "kernel": args.kernel, "samples": args.samples, "seed": args.seed,
                          "tv_distance": tv, "chi_square_pvalue": pval}), args.output)
        return EXIT_OK
    res = run_chain(run)
    if args.output:
        res.to_csv(args.output)
    else:
        res.write_csv(sys.stdout)
    if args.summary:
        _emit(cert.dumps({"graph": g.name, "kernel": args.kernel, "params": prm.to_json(), "seed": args.seed,
                          "samples": args.samples, "burn_in": args.burn_in, "thinning": args.thinning,
                          "summary": res.summary}), args.summary)
    return EXIT_OK


def cmd_dual(args) -> int:
    g, emb = _load_graph(args)
    if emb is None:
        raise UsageError(f"{g.name} has no plane embedding; supply faces in the graph JSON")
    link = build_dual(g, emb)
    out = {"primal": g.name, "dual": link.dual_graph.to_json(link.dual_embedding),
           "edge_map": list(link.edge_map), "embedding_digest": emb.digest()}
    if args.p is not None:
        if args.q is None:
            raise UsageError("--p needs --q")
        out["p"] = args.p
        out["p_dual"] = dual_p(args.p, args.q)
    _emit(cert.dumps(out), args.output)
    return EXIT_OK


def cmd_matrix_export(args) -> int:
    spec, tm = _matrix(args)
    header = {"size": tm.size, "kind": spec.kind, "lazy": spec.lazy, "graph": spec.graph.name,
              "params": spec.params.to_json(), "stationary_sha256": tm.stationary_digest()}
    P = tm.dense()
    if args.format == "npy":
        np.save(args.output, P)
        with open(args.output + ".json", "w") as fh:
            fh.write(cert.dumps(header) + "\n")
    else:
        with open(args.output, "w") as fh:
            fh.write("# " + json.dumps(cert._clean(header), sort_keys=True) + "\n")
            for row in P:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
    return EXIT_OK


COMMANDS = {"gap": cmd_gap, "certify": cmd_certify, "sample": cmd_sample, "dual": cmd_dual,
            "matrix-export": cmd_matrix_export}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"swgap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (ValueError, EnumerationTooLarge, SpectralInputError, OSError, KeyError) as exc:
        print(f"swgap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
