"""Command-line entry point wiring all modules.

Subcommands: phi, decompose, schur-check, delta, amenability-report,
percolate, mtp-check, thm54, selftest.  Every run is fully determined by its
configuration (group spec, parameters, seed); the configuration is echoed
into every output artifact and identical configurations produce byte-identical
data records.  Timestamps live in a separate metadata line, never in records.

Exit codes: 0 success, 2 validation error, 3 statistical-guard abort.

A declarative config file may supply defaults, one `key = value` per line
('#' starts a comment; values are parsed as JSON when possible, otherwise
taken as strings).  Command-line flags win over the config file.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass

from . import __version__
from .amenability import (FolnerSet, amenability_report, folner_boxes,
                          folner_quality, minimize_defect, sup_distance_to_one)
from .functions import SparseFunction, dirac, normalized_indicator
from .groups import BallCapExceeded, Group, ZD, parse_group
from .percolation import (BernoulliSite, ShiftedTiling, StatisticalGuard,
                          doubling_schedule, estimate_autocorrelation,
                          mass_transport_check, run_schedule)
from .posdef import autocorrelation, autocorrelation_kernel, gram_psd_check
from .profiles import TestFamily, decompose_sequence
from .schur import (Window, cp_norm_check, finite_propagation_bound, op_norm,
                    schur_product, schur_test_bound, tube_mask)
from .serialize import (element_to_str, kernel_from_json, parse_element,
                        sparse_from_json, sparse_to_json)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_GUARD = 3


@dataclass
class RunConfig:
    command: str
    group: str
    seed: int
    threads: int
    output: str | None
    format: str
    params: dict

    def as_record(self) -> dict:
        d = asdict(self)
        d["type"] = "config"
        return d


def _read_config_file(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip().replace("-", "_")
            value = value.strip()
            try:
                out[key] = json.loads(value)
            except json.JSONDecodeError:
                out[key] = value
    return out


def _pick(args, cfg: dict, name: str, default, cast=None):
    val = getattr(args, name, None)
    if val is None:
        val = cfg.get(name, default)
    if val is not None and cast is not None and not isinstance(val, cast if isinstance(cast, type) else object):
        pass
    return val


def _emit(config: RunConfig, records: list[dict]) -> None:
    fmt = config.format
    lines = []
    if fmt == "json":
        lines.append(json.dumps(config.as_record(), sort_keys=True, default=str))
        for rec in records:
            rec = dict(rec)
            rec["type"] = "record"
            lines.append(json.dumps(rec, sort_keys=True, default=str))
        meta = {"type": "meta", "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S")}
        lines.append(json.dumps(meta, sort_keys=True))
    else:
        lines.append("# config: " + json.dumps(config.as_record(), sort_keys=True,
                                               default=str))
        keys: list[str] = []
        for rec in records:
            for k in rec:
                if k not in keys:
                    keys.append(k)
        lines.append(",".join(keys))
        for rec in records:
            lines.append(",".join(_csv_cell(rec.get(k, "")) for k in keys))
        lines.append("# meta: timestamp=" + time.strftime("%Y-%m-%dT%H:%M:%S"))
    text = "\n".join(lines) + "\n"
    if config.output:
        with open(config.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    s = str(v)
    if "," in s or '"' in s or "\n" in s:
        s = '"' + s.replace('"', '""') + '"'
    return s


def _builtin_function(group: Group, spec: str) -> SparseFunction:
    parts = spec.split(":")
    if parts[0] != "builtin":
        raise ValueError(f"unknown function spec {spec!r}")
    kind = parts[1]
    opts = dict(kv.split("=", 1) for kv in parts[2:])
    if kind == "dirac":
        return dirac(group, group.identity)
    if kind == "folner":
        n = int(opts.get("n", 10))
        p = float(opts.get("p", 2.0))
        if not isinstance(group, ZD):
            raise ValueError("builtin:folner needs a Z^d group")
        return normalized_indicator(group, folner_boxes(group, n).elements, p)
    raise ValueError(f"unknown builtin function {kind!r}")


def _load_function(group: Group, spec: str) -> SparseFunction:
    if spec.startswith("builtin:"):
        return _builtin_function(group, spec)
    with open(spec) as fh:
        return sparse_from_json(json.load(fh), group)


def _builtin_sequence(group: Group, kind: str, n_range: tuple[int, int],
                      p: float) -> list[SparseFunction]:
    lo, hi = n_range
    out = []
    for n in range(lo, hi + 1):
        if kind == "two-bump":
            if not isinstance(group, ZD) or group.d != 1:
                raise ValueError("builtin two-bump lives on Z1")
            v = 2.0 ** (-1.0 / p)
            out.append(SparseFunction(group, {(-n,): v, (n,): v}))
        elif kind == "folner":
            if not isinstance(group, ZD):
                raise ValueError("builtin folner needs a Z^d group")
            out.append(normalized_indicator(
                group, folner_boxes(group, n).elements, p))
        elif kind == "dirac":
            out.append(dirac(group, group.identity))
        else:
            raise ValueError(f"unknown builtin sequence {kind!r}")
    return out


def _parse_model(group: Group, text: str):
    kind, _, rest = text.partition(":")
    opts = dict(kv.split("=", 1) for kv in rest.split(",") if kv)
    if kind == "tiling":
        return ShiftedTiling(group, int(opts["L"]))
    if kind == "bernoulli":
        cap = int(opts.get("cap", 100_000))
        return BernoulliSite(group, float(opts["q"]), cap)
    raise ValueError(f"unknown model {text!r} (expected tiling:L=.. or bernoulli:q=..)")


# -- subcommand handlers -----------------------------------------------------------


def _cmd_phi(args, cfg) -> tuple[list[dict], dict]:
    group = parse_group(args.group)
    f = _load_function(group, args.f)
    radius = args.radius
    records = []
    for s in group.ball(group.identity, radius):
        records.append({"s": element_to_str(group, s),
                        "value": autocorrelation(f, s)})
    return records, {"f": args.f, "radius": radius}


def _cmd_decompose(args, cfg) -> tuple[list[dict], dict]:
    group = parse_group(args.group)
    p = args.p
    if args.sequence_file:
        with open(args.sequence_file) as fh:
            fs = [sparse_from_json(obj, group) for obj in json.load(fh)]
        source = args.sequence_file
    else:
        lo, hi = (int(t) for t in args.n_range.split(":"))
        fs = _builtin_sequence(group, args.builtin, (lo, hi), p)
        source = f"builtin:{args.builtin}:{args.n_range}"
    eps = args.eps if args.eps and args.eps > 0 else None
    report = decompose_sequence(fs, p, sep_r=args.sep_r, ext_R=args.ext_R,
                                eps=eps, max_k=args.max_k)
    records = []
    for n in range(len(fs)):
        rec = {
            "n": n + 1,
            "components": report.counts[n],
            "residual_pp": report.residual_pp[n],
            "residual_inf": report.residual_inf[n],
            "shifts": ";".join(element_to_str(group, s) for s in report.shifts[n]),
        }
        records.append(rec)
    summary = {
        "stable": report.stable,
        "diagnostics": report.diagnostics,
        "source": source,
        "checks": report.checks,
    }
    if report.xi is not None:
        summary["profiles"] = [sparse_to_json(pr.alpha)
                               for pr in report.xi.profiles]
        summary["profile_masses"] = [pr.mass() for pr in report.xi.profiles]
        summary["min_separation"] = report.min_separation()
    records.append({"n": "summary", **{k: json.dumps(v, sort_keys=True, default=str)
                                       for k, v in summary.items()}})
    return records, {"p": p, "sep_r": args.sep_r, "ext_R": args.ext_R,
                     "eps": args.eps, "source": source}


def _cmd_schur_check(args, cfg) -> tuple[list[dict], dict]:
    group = parse_group(args.group)
    with open(args.kernel) as fh:
        kernel = kernel_from_json(json.load(fh), group, label="cli")
    window = Window.ball(group, args.window_radius)
    psd = gram_psd_check(kernel, window.elements[: min(len(window), 50)])
    records = [{
        "kind": "psd", "psd": psd.psd, "min_eigenvalue": psd.min_eigenvalue,
    }]
    support = kernel.support()
    mask = tube_mask(window, support)
    masked = schur_product(kernel, mask)
    records.append({
        "kind": "bounds",
        "op_norm": op_norm(masked),
        "finite_propagation_bound": finite_propagation_bound(masked, support),
        "schur_test_bound": schur_test_bound(masked),
    })
    if psd.psd:
        check = cp_norm_check(kernel, window, args.trials, args.seed)
        records.append({"kind": "cp-norm", **check})
    return records, {"kernel": args.kernel, "window_radius": args.window_radius,
                     "trials": args.trials}


def _cmd_delta(args, cfg) -> tuple[list[dict], dict]:
    group = parse_group(args.group)
    if args.F_file:
        with open(args.F_file) as fh:
            F = [parse_element(group, str(e)) if not isinstance(e, list)
                 else tuple(e) for e in json.load(fh)]
    else:
        F = list(group.ball(group.identity, args.F_radius))
    res = minimize_defect(group, F, args.p, support_radius=args.K,
                          n_profiles=args.profiles, restarts=args.restarts,
                          seed=args.seed, grid_oracle=args.oracle)
    rec = {
        "p": args.p, "F_size": len(res.F), "value": res.value,
        "window_norm": res.window_norm,
        "profiles": json.dumps([sparse_to_json(pr.alpha)
                                for pr in res.minimizer.profiles],
                               sort_keys=True),
    }
    if "oracle_value" in res.search_log:
        rec["oracle_value"] = res.search_log["oracle_value"]
    return [rec], {"p": args.p, "K": args.K, "profiles": args.profiles,
                   "restarts": args.restarts, "oracle": args.oracle}


def _cmd_amenability_report(args, cfg) -> tuple[list[dict], dict]:
    group = parse_group(args.group)
    radii = [int(t) for t in args.F_radii.split(",")]
    ladder = [float(t) for t in args.p_ladder.split(",")]
    table = amenability_report(group, radii, ladder, restarts=args.restarts,
                               seed=args.seed,
                               support_radius=args.K)
    records = []
    for row in table["rows"]:
        rec = dict(row)
        rec["acf_on_F"] = json.dumps(
            {element_to_str(group, s): v for s, v in row["acf_on_F"].items()},
            sort_keys=True)
        records.append(rec)
    for summary in table["summaries"]:
        records.append({"F_radius": summary["F_radius"],
                        "decreasing_in_p": summary["decreasing_in_p"],
                        "defects": json.dumps(summary["defects"])})
    return records, {"F_radii": radii, "p_ladder": ladder}


def _cmd_percolate(args, cfg) -> tuple[list[dict], dict]:
    group = parse_group(args.group)
    model = _parse_model(group, args.model)
    records = []
    for s_text in args.s.split(";"):
        s = parse_element(group, s_text)
        est = estimate_autocorrelation(model, args.p, s, args.N, args.seed)
        records.append({
            "s": element_to_str(group, s), "mean": est.mean,
            "stderr": est.stderr, "exact": est.exact,
            "N": est.n_samples, "seed": est.seed, "truncated": est.truncated,
        })
    return records, {"model": args.model, "p": args.p, "N": args.N}


def _cmd_mtp_check(args, cfg) -> tuple[list[dict], dict]:
    group = parse_group(args.group)
    model = _parse_model(group, args.model)
    s = parse_element(group, args.s)
    res = mass_transport_check(model, s, args.N, args.seed)
    rec = {
        "s": element_to_str(group, s), "lhs": res.lhs, "rhs": res.rhs,
        "lhs_stderr": res.lhs_stderr, "rhs_stderr": res.rhs_stderr,
        "z_score": res.z_score, "N": res.n_samples, "seed": res.seed,
        "exact_lhs": res.exact_lhs, "exact_rhs": res.exact_rhs,
    }
    return [rec], {"model": args.model, "N": args.N}


def _cmd_thm54(args, cfg) -> tuple[list[dict], dict]:
    group = parse_group(args.group)
    if args.schedule == "builtin:doubling":
        schedule = doubling_schedule(group, args.n_max)
    else:
        with open(args.schedule) as fh:
            entries = json.load(fh)
        schedule = []
        for entry in entries:
            if "L" in entry:
                model = ShiftedTiling(group, int(entry["L"]))
            else:
                model = BernoulliSite(group, float(entry["q"]),
                                      int(entry.get("cap", 100_000)))
            schedule.append((model, float(entry["p"])))
    F = group.ball(group.identity, args.F_radius)
    table = run_schedule(group, schedule, F, args.N, args.seed)
    records = []
    for row in table["rows"]:
        rec = {
            "step": row["step"], "model": row["model"], "p": row["p"],
            "gram_min_eigenvalue": row["gram_min_eigenvalue"],
            "gram_psd_ok": row["gram_psd_ok"],
            "acf_at_identity": row["acf_at_identity"],
        }
        for s in F:
            tag = element_to_str(group, s)
            rec[f"acf[{tag}]"] = row["acf"][s]
            if row["exact"][s] is not None:
                rec[f"exact[{tag}]"] = row["exact"][s]
        records.append(rec)
    records.append({"step": "summary",
                    **{k: json.dumps(v) for k, v in
                       table["strong_convergence_surrogate"].items()}})
    return records, {"schedule": args.schedule, "F_radius": args.F_radius,
                     "N": args.N}


def _cmd_selftest(args, cfg) -> tuple[list[dict], dict]:
    from .seeding import stream
    group = parse_group(args.group or "Z2")
    rng = stream(args.seed, 99)
    checks = []

    def check(name, ok):
        checks.append({"check": name, "ok": bool(ok)})

    # group axioms on random triples
    ball = group.ball(group.identity, 3)
    ok = True
    for _ in range(50):
        a, b, c = (ball[rng.integers(len(ball))] for _ in range(3))
        ok &= group.mul(group.mul(a, b), c) == group.mul(a, group.mul(b, c))
        ok &= group.word_distance(group.mul(c, a), group.mul(c, b)) \
            == group.word_distance(a, b)
    check("group-axioms", ok)

    # acf identities on random sparse functions
    ok = True
    for _ in range(20):
        pts = [ball[rng.integers(len(ball))] for _ in range(4)]
        vals = rng.uniform(0.05, 1.0, size=len(pts))
        f = SparseFunction(group, dict(zip(pts, vals)), relaxed=True)
        ok &= abs(autocorrelation(f, group.identity) - f.lp_mass(2)) < 1e-12
        s = ball[rng.integers(len(ball))]
        ok &= abs(autocorrelation(f, s)) <= f.lp_mass(2) + 1e-12
    check("acf-identities", ok)

    # PSD of acf kernels
    ok = True
    for _ in range(10):
        pts = [ball[rng.integers(len(ball))] for _ in range(3)]
        vals = rng.uniform(0.05, 1.0, size=len(pts))
        f = SparseFunction(group, dict(zip(pts, vals)), relaxed=True)
        k = autocorrelation_kernel(f)
        rep = gram_psd_check(k, ball[:20])
        ok &= rep.psd
    check("acf-psd", ok)

    # tiling invariance and transport, when applicable
    if isinstance(group, ZD):
        from .percolation import (tiling_exact_mass_transport,
                                  tiling_invariance_check)
        model = ShiftedTiling(group, 3)
        shifts = [group.generators[0], group.generators[1]]
        check("tiling-invariance", tiling_invariance_check(model, 2, shifts))
        lhs, rhs = tiling_exact_mass_transport(model, group.generators[0])
        check("tiling-transport", abs(lhs - rhs) < 1e-12)

    # Folner quality sanity
    if isinstance(group, ZD):
        F = folner_boxes(group, 5)
        q = folner_quality(F, group.generators[0])
        check("folner-quality", 0 < q < 2.0 / 11 + 1e-12)

    ok_all = all(c["ok"] for c in checks)
    checks.append({"check": "ALL", "ok": ok_all})
    return checks, {}


_HANDLERS = {
    "phi": _cmd_phi,
    "decompose": _cmd_decompose,
    "schur-check": _cmd_schur_check,
    "delta": _cmd_delta,
    "amenability-report": _cmd_amenability_report,
    "percolate": _cmd_percolate,
    "mtp-check": _cmd_mtp_check,
    "thm54": _cmd_thm54,
    "selftest": _cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schurkit",
        description="Desk-scale group harmonic analysis: autocorrelation "
                    "kernels, Schur window bounds, profile decompositions, "
                    "amenability defects and invariant percolation.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, group_required=True):
        sp.add_argument("--group", required=group_required,
                        help="group spec: Z1, Z2, Z3, F2, C12, ...")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        sp.add_argument("--output", help="output path (default stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--config", help="declarative config file (flags win)")

    sp = sub.add_parser("phi", help="autocorrelation values over a ball")
    common(sp)
    sp.add_argument("--f", required=True,
                    help="JSON function file or builtin:folner:n=10")
    sp.add_argument("--radius", type=int, default=10)

    sp = sub.add_parser("decompose", help="profile decomposition of a sequence")
    common(sp)
    sp.add_argument("--sequence-file")
    sp.add_argument("--builtin", choices=("two-bump", "folner", "dirac"))
    sp.add_argument("--n-range", default="1:20", help="inclusive range lo:hi")
    sp.add_argument("--p", type=float, default=1.5)
    sp.add_argument("--sep-r", type=int, default=2, dest="sep_r")
    sp.add_argument("--ext-R", type=int, default=8, dest="ext_R")
    sp.add_argument("--eps", type=float, default=0.0,
                    help="extraction threshold (0 = per-n default)")
    sp.add_argument("--max-k", type=int, default=16, dest="max_k")

    sp = sub.add_parser("schur-check", help="window norm bounds for a kernel")
    common(sp)
    sp.add_argument("--kernel", required=True, help="kernel JSON file")
    sp.add_argument("--window-radius", type=int, default=4, dest="window_radius")
    sp.add_argument("--trials", type=int, default=20)

    sp = sub.add_parser("delta", help="identity-approximation defect")
    common(sp)
    sp.add_argument("--F-radius", type=int, default=1, dest="F_radius")
    sp.add_argument("--F-file", dest="F_file")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--K", type=int, required=True, help="search support radius")
    sp.add_argument("--profiles", type=int, default=1)
    sp.add_argument("--restarts", type=int, default=8)
    sp.add_argument("--oracle", action="store_true")

    sp = sub.add_parser("amenability-report", help="defect ladder table")
    common(sp)
    sp.add_argument("--F-radii", default="1,2", dest="F_radii")
    sp.add_argument("--p-ladder", default="1.2,1.5,1.8,1.95", dest="p_ladder")
    sp.add_argument("--K", type=int, default=None)
    sp.add_argument("--restarts", type=int, default=8)

    sp = sub.add_parser("percolate", help="Monte-Carlo cluster acf estimates")
    common(sp)
    sp.add_argument("--model", required=True,
                    help="tiling:L=4 or bernoulli:q=0.4")
    sp.add_argument("--p", type=float, default=1.5)
    sp.add_argument("--s", default="0",
                    help="semicolon-separated element list")
    sp.add_argument("--N", type=int, default=10000)

    sp = sub.add_parser("mtp-check", help="mass-transport principle check")
    common(sp)
    sp.add_argument("--model", required=True)
    sp.add_argument("--s", default="1")
    sp.add_argument("--N", type=int, default=10000)

    sp = sub.add_parser("thm54", help="schedule table of expected cluster acf")
    common(sp)
    sp.add_argument("--schedule", default="builtin:doubling",
                    help="JSON schedule file or builtin:doubling")
    sp.add_argument("--n-max", type=int, default=10, dest="n_max")
    sp.add_argument("--F-radius", type=int, default=2, dest="F_radius")
    sp.add_argument("--N", type=int, default=10000)

    sp = sub.add_parser("selftest", help="run the quick invariant battery")
    common(sp, group_required=False)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = {}
    if getattr(args, "config", None):
        try:
            cfg = _read_config_file(args.config)
        except (OSError, ValueError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        for key, value in cfg.items():
            if getattr(args, key, None) in (None,) and hasattr(args, key):
                setattr(args, key, value)
    handler = _HANDLERS[args.command]
    try:
        records, params = handler(args, cfg)
    except StatisticalGuard as exc:
        print(f"statistical guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ValueError, KeyError, OSError, BallCapExceeded,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    config = RunConfig(
        command=args.command, group=getattr(args, "group", None) or "",
        seed=getattr(args, "seed", 0), threads=getattr(args, "threads", 1),
        output=getattr(args, "output", None),
        format=getattr(args, "format", "json"), params=params)
    _emit(config, records)
    if args.command == "selftest" and not all(r["ok"] for r in records):
        return 1
    return EXIT_OK


def main() -> None:
    sys.exit(run())
