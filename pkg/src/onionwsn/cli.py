"""``onionwsn`` command line: topology generation, key generation, single
query traces, Monte Carlo experiments and closed-form analyses.

Exit status: 0 on success, 1 on usage errors, 2 on simulation errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import random
import sys
from datetime import datetime, timezone
from typing import List, Optional, Sequence

from . import analysis
from ._rng import derive_seed
from .crypto import get_group, keygen, shared_key, ephemeral
from .errors import OnionWSNError
from .netsim import EnergyParams, SimConfig, Simulator, flood_energy
from .topology import TopologyGraph, generate_topology

log = logging.getLogger("onionwsn")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(x) for x in text.split(",") if x]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc))
    return parse


def _common(p: argparse.ArgumentParser, fmt: Optional[str] = None) -> None:
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default 0, with a warning)")
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp header line")
    if fmt:
        p.add_argument("--format", choices=["csv", "jsonl"], default=fmt)


def _topology_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topo", choices=["grid", "random-geometric"], default="random-geometric")
    p.add_argument("--topo-file", help="read the topology JSON instead of generating one")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--side", type=float, default=None, help="area side in meters")
    p.add_argument("--range", dest="radio_range", type=float, default=30.0)
    p.add_argument("--rows", type=int, default=0)
    p.add_argument("--cols", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="onionwsn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    topo = sub.add_parser("topo").add_subparsers(dest="action", parser_class=_Parser)
    topo.required = True
    p = topo.add_parser("gen", help="generate a topology JSON file")
    p.add_argument("--kind", choices=["grid", "random-geometric"], default="random-geometric")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--side", type=float, default=None)
    p.add_argument("--range", dest="radio_range", type=float, default=30.0)
    p.add_argument("--rows", type=int, default=0)
    p.add_argument("--cols", type=int, default=0)
    _common(p)

    p = sub.add_parser("keygen", help="generate key pairs or KDF test vectors")
    p.add_argument("--group", choices=["secp160r1", "schnorr160"], default="secp160r1")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--vectors", action="store_true", help="emit {x, R, key} test vectors")
    _common(p)

    query = sub.add_parser("query").add_subparsers(dest="action", parser_class=_Parser)
    query.required = True
    p = query.add_parser("run", help="one end-to-end query with transcript dump")
    _topology_args(p)
    p.add_argument("--t", type=int, default=12)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--z", type=int, default=0)
    p.add_argument("--mode", choices=["basic", "overlay"], default="basic")
    p.add_argument("--group", choices=["secp160r1", "schnorr160"], default="secp160r1")
    p.add_argument("--packet-limit", choices=["enforce-128", "abstract"], default="enforce-128")
    p.add_argument("--header-len", type=int, default=None, help="header size L_c in bytes")
    _common(p, fmt="jsonl")

    sim = sub.add_parser("sim").add_subparsers(dest="action", parser_class=_Parser)
    sim.required = True
    for name in ("known-nodes", "privacy"):
        p = sim.add_parser(name)
        p.add_argument("--n", type=int, default=1000)
        p.add_argument("--z", type=int, default=100)
        p.add_argument("--t", type=int, default=20)
        p.add_argument("--trials", type=int, default=10_000 if name == "known-nodes" else 100_000)
        p.add_argument("--jobs", type=int, default=1)
        if name == "privacy":
            p.add_argument("--strong", action="store_true",
                           help="also exclude the gateway-visible endpoints")
        _common(p, fmt="csv")
    p = sim.add_parser("pattern")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--t", type=int, default=12)
    p.add_argument("--z", type=int, default=None, help="infected count (default: all)")
    p.add_argument("--pool-size", type=int, default=10)
    p.add_argument("--c", type=int, default=4)
    p.add_argument("--queries", type=int, default=500)
    p.add_argument("--weights", type=_csv_list(float), default=[0.8, 0.2])
    p.add_argument("--repeats", type=int, default=1)
    _common(p, fmt="csv")

    an = sub.add_parser("analyze").add_subparsers(dest="action", parser_class=_Parser)
    an.required = True
    p = an.add_parser("figure3")
    p.add_argument("--t", type=int, default=20)
    p.add_argument("--n-list", type=_csv_list(int), default=[100, 1000, 10000])
    p.add_argument("--steps", type=int, default=20)
    _common(p, fmt="csv")
    p = an.add_parser("budget")
    p.add_argument("--Lr", type=int, default=16)
    p.add_argument("--b", type=int, default=16)
    p.add_argument("--payload-bits", type=int, default=920)
    p.add_argument("--eph", type=int, default=21)
    _common(p, fmt="csv")
    p = an.add_parser("energy")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--t", type=int, default=12)
    p.add_argument("--ecc", type=float, default=13.73)
    p.add_argument("--sym", type=float, default=1.0)
    p.add_argument("--rx", type=float, default=123.0)
    p.add_argument("--tx", type=float, default=114.0)
    _common(p, fmt="csv")
    return parser


def _header(args, seed: int) -> List[str]:
    lines = [f"onionwsn {args.command} {getattr(args, 'action', '') or ''} seed={seed}".replace("  ", " ")]
    if not args.no_timestamp:
        lines.append("generated " + datetime.now(timezone.utc).isoformat(timespec="seconds"))
    return lines


def _emit_rows(args, seed: int, header: Sequence[str], rows: Sequence[dict],
               notes: Sequence[str] = ()) -> str:
    meta = _header(args, seed) + list(notes)
    if getattr(args, "format", "csv") == "jsonl":
        out = [json.dumps({"meta": meta})]
        out += [json.dumps({k: r.get(k) for k in header}) for r in rows]
        return "\n".join(out) + "\n"
    buf = io.StringIO()
    for line in meta:
        buf.write(f"# {line}\n")
    w = csv.DictWriter(buf, fieldnames=list(header), extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in header})
    return buf.getvalue()


def _load_or_build(args) -> Optional[TopologyGraph]:
    if args.topo_file:
        with open(args.topo_file) as fh:
            return TopologyGraph.from_json(fh.read())
    return None


def cmd_topo_gen(args, seed):
    g = generate_topology(args.kind, n=args.n, side=args.side, radio_range=args.radio_range,
                          rows=args.rows, cols=args.cols, seed=seed)
    doc = g.to_dict()
    doc["meta"] = {"kind": args.kind, "seed": seed}
    return json.dumps(doc, separators=(",", ":")) + "\n"


def cmd_keygen(args, seed):
    group = get_group(args.group)
    out = []
    for i in range(args.count):
        kp = keygen(derive_seed(seed, "cli-key", i), args.group)
        rec = {"private": f"{kp.private:x}", "public": group.encode(kp.public).hex()}
        if args.vectors:
            eph = ephemeral(derive_seed(seed, "cli-eph", i), args.group)
            rec = {"x": f"{kp.private:x}", "R": eph.encoded.hex(),
                   "key": shared_key(kp.private, eph.R, args.group).hex()}
        out.append(rec)
    return json.dumps({"meta": _header(args, seed), "group": args.group, "keys": out},
                      indent=1) + "\n"


def cmd_query_run(args, seed):
    graph = _load_or_build(args)
    cfg = SimConfig(topology=args.topo, n=args.n, side=args.side, radio_range=args.radio_range,
                    rows=args.rows, cols=args.cols, t=args.t, z=args.z, mode=args.mode,
                    group=args.group, packet_limit=args.packet_limit,
                    header_len=args.header_len, seed=seed)
    sim = Simulator(cfg, graph)
    tr = sim.run_query(args.target, seed)
    if args.format == "csv":
        rows = [e.to_dict() for e in tr.events]
        return _emit_rows(args, seed, ["hop", "from", "to", "header_len", "body_len", "energy_mJ"],
                          rows, [f"summary {json.dumps(tr.summary(), sort_keys=True)}"])
    return json.dumps({"meta": _header(args, seed)}) + "\n" + tr.to_jsonl()


def cmd_sim_known(args, seed):
    r = analysis.mc_known_nodes(args.n, args.z, args.t, args.trials, seed, jobs=args.jobs)
    row = {"n": args.n, "z": args.z, "t": args.t, "frac_infected": args.z / args.n,
           "expected_known": analysis.expected_known_nodes(args.n, args.z, args.t),
           "mc_known_mean": r.mean, "mc_ci95": r.ci95}
    return _emit_rows(args, seed, analysis.SWEEP_HEADER, [row], [f"trials={args.trials}"])


def cmd_sim_privacy(args, seed):
    r = analysis.mc_breaking_probability(args.n, args.z, args.t, args.trials, seed,
                                         strong=args.strong, jobs=args.jobs)
    p = analysis.breaking_probability(args.n, args.z, args.t)
    row = {"n": args.n, "z": args.z, "t": args.t, "frac_infected": args.z / args.n,
           "eq3_prob": p, "empirical_prob": r.rate}
    notes = [f"trials={args.trials} successes={r.successes} within_3sigma={r.within_3sigma(p)}"]
    return _emit_rows(args, seed, analysis.SWEEP_HEADER, [row], notes)


def cmd_sim_pattern(args, seed):
    from .topology import random_geometric_topology
    g = random_geometric_topology(args.n, seed=derive_seed(seed, "pattern-topology"))
    z = args.n if args.z is None else args.z
    rows = []
    for rep in range(args.repeats):
        s = derive_seed(seed, "repeat", rep)
        rng = random.Random(s)
        infected = frozenset(rng.sample(range(1, g.n + 1), z))
        targets = rng.sample(range(1, g.n + 1), len(args.weights))
        workload = analysis.skewed_workload(targets, args.weights, args.queries, s)
        truth = dict(zip(targets, args.weights))
        row = {"repeat": rep, "seed": s}
        for label, pool in (("baseline", analysis.PatternPool((), 0)),
                            ("pool", analysis.PatternPool.random(g, args.pool_size, args.c, s))):
            plans = analysis.pattern_schedule(pool, g, workload, args.t, s)
            views = [analysis.adversary_view(p, infected, g) for p in plans]
            row[f"leakage_{label}"] = analysis.frequency_leakage(views, truth, g.n)
        rows.append(row)
    return _emit_rows(args, seed, ["repeat", "seed", "leakage_baseline", "leakage_pool"], rows,
                      [f"n={args.n} t={args.t} z={z} pool={args.pool_size} c={args.c}"])


def cmd_an_figure3(args, seed):
    fracs = [i / args.steps for i in range(args.steps + 1)]
    rows = analysis.figure3_sweep(args.n_list, args.t, fracs)
    return _emit_rows(args, seed, analysis.SWEEP_HEADER, rows)


def cmd_an_budget(args, seed):
    rows = []
    for mode in ("paper-exact", "byte-aligned"):
        t = analysis.max_route_length(args.Lr, args.b, args.payload_bits, mode, args.eph)
        rows.append({"mode": mode, "Lr": args.Lr, "b": args.b,
                     "payload_bits": args.payload_bits, "max_t": t})
    note = analysis.budget_note(rows[0]["max_t"])
    print(note, file=sys.stderr)
    return _emit_rows(args, seed, analysis.BUDGET_HEADER, rows, [f"note: {note}"])


def cmd_an_energy(args, seed):
    ep = EnergyParams(args.ecc, args.sym, args.rx, args.tx)
    per = ep.onion_hop_mJ
    basic = (args.t + 2) * per
    flood = flood_energy(args.n, ep)
    rows = [
        {"quantity": "per_onion_sensor_mJ", "value": round(per, 6)},
        {"quantity": "basic_query_total_mJ", "value": round(basic, 6)},
        {"quantity": "flood_total_mJ", "value": round(flood, 6)},
        {"quantity": "flood_over_basic", "value": round(flood / basic, 6)},
    ]
    return _emit_rows(args, seed, ["quantity", "value"], rows, [f"n={args.n} t={args.t}"])


COMMANDS = {
    ("topo", "gen"): cmd_topo_gen,
    ("keygen", None): cmd_keygen,
    ("query", "run"): cmd_query_run,
    ("sim", "known-nodes"): cmd_sim_known,
    ("sim", "privacy"): cmd_sim_privacy,
    ("sim", "pattern"): cmd_sim_pattern,
    ("analyze", "figure3"): cmd_an_figure3,
    ("analyze", "budget"): cmd_an_budget,
    ("analyze", "energy"): cmd_an_energy,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    seed = args.seed
    if seed is None:
        log.warning("no --seed given; using seed 0")
        seed = 0
    handler = COMMANDS[(args.command, getattr(args, "action", None))]
    try:
        text = handler(args, seed)
    except (OnionWSNError, ValueError) as exc:
        print(f"onionwsn: {getattr(exc, 'code', 'error')}: {exc}", file=sys.stderr)
        return 2
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
