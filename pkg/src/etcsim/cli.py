"""Scenario runner CLI.

Runs named presets or INI configurations, writes CSV artifacts plus a
re-runnable manifest, and offers a validate-only mode that reports the
derived trigger constants and the robustness bound check per agent.

Exit codes: 0 success, 2 validation failure, 3 jump storm, 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import io
import re
import sys
from pathlib import Path

import numpy as np

from .engine import JumpStormError, Scenario, SolutionTrace, consensus_metrics, \
    inter_event_stats, lyapunov_series, simulate
from .etm import (
    BerneburgParams,
    BerneburgScheme,
    DolkParams,
    DolkScheme,
    GarciaParams,
    GarciaScheme,
    ZenoGuaranteeError,
)
from .graph import BENCHMARK_EDGES, Graph, benchmark_topology
from .presets import PRESETS, build_preset, quadratic_single_scheme
from .signals import NoiseSignal

__all__ = ["main", "run", "validate", "list_presets", "config_to_scenario", "scenario_to_config"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_JUMP_STORM = 3
EXIT_IO = 4

# config keyword selecting the built-in 8-agent benchmark topology
BENCHMARK_GRAPH_KEYWORD = "paper-fig2"

_FMT = "%.17g"


def _fmt(x: float) -> str:
    return _FMT % float(x)


def _parse_vector(text: str) -> np.ndarray:
    toks = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    return np.array([float(t) for t in toks])


def _vec_str(v) -> str:
    return ", ".join(_fmt(x) for x in np.atleast_1d(v))


# ---------------------------------------------------------------------------
# config <-> scenario


def _parse_graph(section) -> Graph:
    edges_text = section.get("edges", BENCHMARK_GRAPH_KEYWORD).strip()
    if edges_text == BENCHMARK_GRAPH_KEYWORD:
        return benchmark_topology()
    n = section.getint("n")
    undirected = section.getboolean("undirected", fallback=True)
    edges = []
    for line in edges_text.splitlines():
        toks = line.split()
        if not toks:
            continue
        if len(toks) == 2:
            edges.append((int(toks[0]), int(toks[1])))
        elif len(toks) == 3:
            edges.append((int(toks[0]), int(toks[1]), float(toks[2])))
        else:
            raise ValueError(f"bad edge line {line!r}: expected 'i j [weight]'")
    return Graph.from_edge_list(n, edges, undirected=undirected)


def _scheme_from_config(cp: configparser.ConfigParser, graph: Graph | None):
    etm = cp["etm"]
    kind = etm.get("kind")
    allow_zeno = etm.getboolean("allow_zeno", fallback=False)

    def vec(key, default):
        raw = etm.get(key, fallback=None)
        return default if raw is None else _parse_vector(raw)

    if kind == "garcia":
        p = GarciaParams(
            a=etm.getfloat("a"),
            sigma=vec("sigma", 0.5), c=vec("c", 0.0), theta=vec("theta", 0.0),
            w_bar=vec("w_bar", 0.0), mode=etm.get("mode", "static"),
            eps_eta=etm.getfloat("eps_eta", fallback=0.05),
            form=etm.get("form", "modified"),
        )
        return GarciaScheme(graph, p, allow_zeno=allow_zeno)
    if kind == "dolk":
        p = DolkParams(
            a=etm.getfloat("a"),
            varrho=etm.getfloat("varrho", fallback=0.05),
            mu=vec("mu", 0.05), alpha=vec("alpha", 0.5), lam=vec("lam", 0.2),
            c=vec("c", 0.0), theta=vec("theta", 0.0), w_bar=vec("w_bar", 0.0),
            eps_eta=etm.getfloat("eps_eta", fallback=0.05),
            reset_mode=etm.get("reset_mode", "standard"),
            sigma_form=etm.get("sigma_form", "original"),
        )
        return DolkScheme(graph, p, allow_zeno=allow_zeno)
    if kind == "berneburg":
        p = BerneburgParams(
            sigma=vec("sigma", 0.5), c=vec("c", 0.0), theta=vec("theta", 0.0),
            w_bar=vec("w_bar", 0.0), mode=etm.get("mode", "static"),
            eps_eta=etm.getfloat("eps_eta", fallback=0.05),
        )
        return BerneburgScheme(graph, p, allow_zeno=allow_zeno)
    if kind == "single":
        return quadratic_single_scheme(
            delta_coef=etm.getfloat("delta_coef"),
            beta_coef=etm.getfloat("beta_coef"),
            c=etm.getfloat("c", fallback=0.0),
            w_bar=etm.getfloat("w_bar", fallback=0.0),
            mode=etm.get("mode", "static"),
            theta=etm.getfloat("theta", fallback=0.0),
            eps_eta=etm.getfloat("eps_eta", fallback=0.05),
            allow_zeno=allow_zeno,
        )
    raise ValueError(f"unknown etm kind {kind!r}")


def config_to_scenario(cp: configparser.ConfigParser) -> Scenario:
    kind = cp["etm"].get("kind")
    graph = None
    if kind != "single":
        if not cp.has_section("graph"):
            raise ValueError("config needs a [graph] section for consensus schemes")
        graph = _parse_graph(cp["graph"])
    scheme = _scheme_from_config(cp, graph)

    noise_sec = cp["noise"]
    noise = NoiseSignal(
        seed=noise_sec.getint("seed"),
        amplitude=_parse_vector(noise_sec.get("amplitude")),
        sample_rate=noise_sec.getfloat("sample_rate_hz"),
        n=scheme.n,
    )

    sim = cp["sim"]
    kwargs = {}
    if kind == "single":
        kwargs["feedback"] = np.array([[1.0]])
    else:
        kwargs["graph"] = graph
    return Scenario(
        scheme=scheme,
        noise=noise,
        x0=_parse_vector(sim.get("x0")),
        t_final=sim.getfloat("t_final"),
        step=sim.getfloat("step"),
        decimation=sim.getint("decimation", fallback=1),
        detection_refinement=sim.getboolean("detection_refinement", fallback=False),
        **kwargs,
    )


def scenario_to_config(s: Scenario, derived: dict | None = None) -> configparser.ConfigParser:
    """Emit a config that rebuilds the scenario exactly (float values at
    round-trip precision)."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    scheme = s.scheme
    kind = {
        "GarciaScheme": "garcia",
        "DolkScheme": "dolk",
        "BerneburgScheme": "berneburg",
        "SingleSystemScheme": "single",
    }[type(scheme).__name__]

    if kind != "single":
        cp["graph"] = {}
        g = s.graph
        if g.edges == benchmark_topology().edges and g.undirected:
            cp["graph"]["edges"] = BENCHMARK_GRAPH_KEYWORD
        else:
            cp["graph"]["n"] = str(g.n)
            cp["graph"]["undirected"] = str(g.undirected).lower()
            cp["graph"]["edges"] = "\n" + "\n".join(
                f"{i} {j} {_fmt(w)}" for i, j, w in g.edges
            )

    etm = {"kind": kind, "allow_zeno": str(scheme.allow_zeno).lower()}
    if kind == "single":
        dc, bc = scheme.quad_coefs
        h = scheme.hooks
        etm.update(delta_coef=_fmt(dc), beta_coef=_fmt(bc), c=_fmt(h.c),
                   w_bar=_fmt(h.w_bar), theta=_fmt(h.theta), mode=h.mode,
                   eps_eta=_fmt(h.eps_eta))
    else:
        p = scheme.params
        etm.update(c=_vec_str(scheme.c), theta=_vec_str(scheme.theta),
                   w_bar=_vec_str(scheme.w_bar), eps_eta=_fmt(p.eps_eta))
        if kind == "garcia":
            etm.update(a=_fmt(p.a), sigma=_vec_str(scheme.sigma),
                       mode=p.mode, form=p.form)
        elif kind == "dolk":
            etm.update(a=_fmt(p.a), varrho=_fmt(p.varrho), mu=_vec_str(scheme.mu),
                       alpha=_vec_str(scheme.alpha), lam=_vec_str(scheme.lam),
                       reset_mode=p.reset_mode, sigma_form=p.sigma_form)
        elif kind == "berneburg":
            etm.update(sigma=_vec_str(scheme.sigma), mode=p.mode)
    cp["etm"] = etm

    cp["noise"] = {
        "seed": str(s.noise.seed),
        "amplitude": _vec_str(s.noise.amplitude),
        "sample_rate_hz": _fmt(s.noise.sample_rate),
    }
    cp["sim"] = {
        "x0": _vec_str(s.x0),
        "t_final": _fmt(s.t_final),
        "step": _fmt(s.step),
        "decimation": str(s.decimation),
        "detection_refinement": str(s.detection_refinement).lower(),
    }
    if derived:
        cp["derived"] = {k: _vec_str(v) if np.ndim(v) else _fmt(v)
                         for k, v in derived.items()}
    return cp


# ---------------------------------------------------------------------------
# artifacts


def _write_states(path: Path, trace: SolutionTrace) -> None:
    n = trace.n
    cols = (["t", "j"]
            + [f"x{i}" for i in range(n)] + [f"e{i}" for i in range(n)]
            + [f"what_w{i}" for i in range(n)] + [f"eta{i}" for i in range(n)]
            + [f"tau{i}" for i in range(n)])
    data = np.column_stack([trace.times, trace.jumps.astype(float), trace.states])
    fmts = [_FMT, "%d"] + [_FMT] * (5 * n)
    with path.open("w") as fh:
        fh.write(",".join(cols) + "\n")
        np.savetxt(fh, data, fmt=fmts, delimiter=",")


def _write_events(path: Path, trace: SolutionTrace, delta_u: np.ndarray) -> None:
    with path.open("w") as fh:
        fh.write("agent,t,j,gap,psi,delta_u\n")
        for ev, du in zip(trace.events, delta_u):
            gap = "" if ev.inter_event_gap is None else _fmt(ev.inter_event_gap)
            fh.write(f"{ev.agent},{_fmt(ev.time.t)},{ev.time.j},{gap},"
                     f"{_fmt(ev.psi_value)},{_fmt(du)}\n")


def _write_metrics(path: Path, trace: SolutionTrace) -> None:
    stats = inter_event_stats(trace)
    cons = consensus_metrics(trace)
    with path.open("w") as fh:
        fh.write("agent,min_gap,mean_gap,event_count\n")
        for i in range(trace.n):
            st = stats[i]
            mn = "" if st["min"] is None else _fmt(st["min"])
            mean = "" if st["mean"] is None else _fmt(st["mean"])
            fh.write(f"{i},{mn},{mean},{st['count']}\n")
        fh.write(f"final_max_deviation,{_fmt(cons['final_max_deviation'])},,\n")
        fh.write(f"final_distance,{_fmt(cons['distance_series'][-1])},,\n")


def write_run_artifacts(out_dir: Path, scenario: Scenario, trace: SolutionTrace) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _, _, delta_u = lyapunov_series(trace, scenario.scheme, scenario.feedback)
    _write_states(out_dir / "states.csv", trace)
    _write_events(out_dir / "events.csv", trace, delta_u)
    _write_metrics(out_dir / "metrics.csv", trace)
    cp = scenario_to_config(scenario, derived=scenario.scheme.derived_constants())
    with (out_dir / "manifest.ini").open("w") as fh:
        cp.write(fh)


# ---------------------------------------------------------------------------
# commands


def list_presets(stream=None) -> int:
    stream = stream or sys.stdout
    for name, preset in PRESETS.items():
        print(f"{name:20s} {preset.description}", file=stream)
    return EXIT_OK


def validate(scenario: Scenario, label: str = "", stream=None) -> int:
    """Report derived constants and the per-agent robustness-bound
    check. Never simulates."""
    stream = stream or sys.stdout
    scheme = scenario.scheme
    bound = scheme.c_lower_bound()
    derived = scheme.derived_constants()
    if label:
        print(f"== {label} ==", file=stream)
    print(f"scheme: {type(scheme).__name__} mode={scheme.mode}", file=stream)
    for key, val in derived.items():
        vals = ", ".join(f"{v:.6g}" for v in np.atleast_1d(val))
        print(f"  {key}: [{vals}]", file=stream)
    ok = True
    for i in range(scheme.n):
        if bound[i] == 0.0:
            passed = scheme.c[i] >= 0.0
            note = "bound 0 (timer-gated or noise-free)"
        else:
            passed = scheme.c[i] > bound[i]
            note = f"need c > {bound[i]:.3g}"
        ok &= bool(passed)
        verdict = "pass" if passed else "FAIL"
        print(f"  agent {i}: c={scheme.c[i]:.3g} {note} -> {verdict}", file=stream)
    if not ok and getattr(scheme, "allow_zeno", False):
        print("  note: allow_zeno is set; run proceeds without the "
              "no-Zeno guarantee", file=stream)
        return EXIT_OK
    return EXIT_OK if ok else EXIT_VALIDATION


def run(scenario: Scenario, out_dir: Path, label: str = "", stream=None) -> int:
    stream = stream or sys.stdout
    try:
        trace = simulate(scenario)
    except JumpStormError as exc:
        print(f"jump storm: {exc}", file=sys.stderr)
        return EXIT_JUMP_STORM
    try:
        write_run_artifacts(out_dir, scenario, trace)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    cons = consensus_metrics(trace)
    tag = f"{label}: " if label else ""
    print(f"{tag}{len(trace.events)} events, final max deviation "
          f"{cons['final_max_deviation']:.4g}, artifacts in {out_dir}", file=stream)
    return EXIT_OK


def _build_from_args(args) -> list[tuple[str | None, Scenario]]:
    if args.preset:
        pairs = build_preset(args.preset, seed=args.seed)
    else:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        read = cp.read(args.config)
        if not read:
            raise FileNotFoundError(f"config file {args.config} not found")
        scenario = config_to_scenario(cp)
        if args.seed is not None:
            noise = scenario.noise
            scenario.noise = NoiseSignal(
                seed=args.seed, amplitude=noise.amplitude,
                sample_rate=noise.sample_rate, n=noise.n,
            )
        pairs = [(None, scenario)]
    for _, sc in pairs:
        if args.t_final is not None:
            sc.t_final = args.t_final
        if args.step is not None:
            sc.step = args.step
        if args.decimate is not None:
            sc.decimation = args.decimate
    return pairs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="etcsim",
        description="Event-triggered consensus simulator under bounded "
                    "measurement noise",
    )
    src = parser.add_mutually_exclusive_group()
    src.add_argument("--preset", help="named scenario from the catalog")
    src.add_argument("--config", help="path to an INI scenario file")
    src.add_argument("--batch", help="comma-separated preset list, or 'all'")
    src.add_argument("--list-presets", action="store_true", help="print the catalog")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="noise seed override")
    parser.add_argument("--t-final", type=float, default=None, help="horizon override (s)")
    parser.add_argument("--step", type=float, default=None, help="integration step override (s)")
    parser.add_argument("--decimate", type=int, default=None, help="record every K-th step")
    parser.add_argument("--validate-only", action="store_true",
                        help="check parameters and print derived constants; no simulation")
    args = parser.parse_args(argv)

    if args.list_presets:
        return list_presets()

    if args.batch:
        names = list(PRESETS) if args.batch == "all" else \
            [s.strip() for s in args.batch.split(",") if s.strip()]
        worst = EXIT_OK
        for name in names:
            code = _dispatch_one(args, name, Path(args.out) / name)
            worst = max(worst, code)
        return worst

    if not (args.preset or args.config):
        parser.error("one of --preset, --config, --batch, --list-presets is required")
    return _dispatch_one(args, args.preset, Path(args.out))


def _dispatch_one(args, preset_name: str | None, out_dir: Path) -> int:
    import copy

    local = copy.copy(args)
    local.preset = preset_name
    if preset_name is None:
        local.config = args.config
    try:
        pairs = _build_from_args(local)
    except (ZenoGuaranteeError, ValueError, KeyError, configparser.Error) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    worst = EXIT_OK
    for sub, scenario in pairs:
        label = preset_name or "config"
        if sub:
            label = f"{label}/{sub}"
        if args.validate_only:
            code = validate(scenario, label=label)
        else:
            dest = out_dir / sub if sub else out_dir
            code = run(scenario, dest, label=label)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
