"""Command-line driver: ingest, generate, analyze, stabilize, contagion, compare."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import report
from .analysis import MODES, EmptyStructureError, analyze, stabilise
from .contagion import simulate_stepwise, sweep_triggers
from .generator import GeneratorConfig, GeneratorConfigError, generate, metadata, write_generated
from .portfolio import (LAYER_BASES, ParseError, Portfolio, ValidationError, apply_reporting_threshold,
                        load_portfolio, load_portfolio_dir, save_portfolio)
from .spectral import NonConvergenceError
from .stabilisation import (SEARCH_TOL, NonMonotoneError, StabilisationError, Target,
                            UnachievableTargetError, blend_indexes)
from .tensor import MultiplexImpactTensor

log = logging.getLogger("multiplex_contagion")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_NONCONVERGENCE = 5
EXIT_UNACHIEVABLE = 6
EXIT_NONMONOTONE = 7
EXIT_STABILISATION = 8


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    data_dir: str | None = None
    institutions: str | None = None
    exposures: list = field(default_factory=list)
    generator: dict | None = None
    seed: int | None = None
    threshold: str | None = None
    mode: str = "multiplex"
    layer: str = "D"
    basis: str = "EAD"
    capital_basis: str | None = None
    compare_mode: str = "single"
    compare_layer: str = "D"
    compare_basis: str = "EAD"
    triggers: list | None = None
    target_kind: str = "risk"
    target_value: float = 0.0
    search_tol: float = SEARCH_TOL
    blend_nac_weight: float | None = None
    out: str = "out"
    traces: bool = False
    x_table: bool = False
    dot: bool = False
    unfolded: bool = False

    def validate(self):
        has_files = bool(self.data_dir or self.institutions)
        if has_files and self.generator is not None:
            raise ConfigError("give either input files or a generator config, not both")
        if self.data_dir and self.institutions:
            raise ConfigError("give either a data directory or an institutions file, not both")
        if self.exposures and not self.institutions:
            raise ConfigError("--exposures needs --institutions")
        for mode, layer, basis in ((self.mode, self.layer, self.basis),
                                   (self.compare_mode, self.compare_layer, self.compare_basis)):
            if mode not in MODES:
                raise ConfigError(f"unknown mode {mode!r}")
            if layer not in LAYER_BASES or basis not in LAYER_BASES[layer]:
                raise ConfigError(f"invalid layer/basis combination {layer}/{basis}")
            if mode != "single" and layer != "D":
                raise ConfigError("multiplex modes take the derivatives basis only (--layer D)")
        if self.capital_basis not in (None, "raw", "modified"):
            raise ConfigError(f"unknown capital basis {self.capital_basis!r}")
        if self.target_kind not in ("risk", "resilience"):
            raise ConfigError(f"unknown target kind {self.target_kind!r}")
        if self.blend_nac_weight is not None and not 0 <= self.blend_nac_weight <= 1:
            raise ConfigError("blend weight must lie in [0, 1]")
        return self

    @property
    def uses_generator(self) -> bool:
        return not (self.data_dir or self.institutions)

    def generator_config(self) -> GeneratorConfig:
        data = dict(self.generator or {})
        if self.seed is not None:
            data["seed"] = self.seed
        return GeneratorConfig.from_dict(data)


def _parse_exposure(text: str) -> tuple[str, str, str]:
    parts = text.split(":", 2)
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected LAYER:BASIS:PATH, got {text!r}")
    return parts[0], parts[1], parts[2]


def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("input")
    g.add_argument("--config", help="JSON file with scenario fields and an optional 'generator' object")
    g.add_argument("--seed", type=int, help="generator seed (used when no input files are given)")
    g.add_argument("--data", dest="data_dir", help="directory holding institutions.csv and exposures_*.csv")
    g.add_argument("--institutions", help="institutions CSV")
    g.add_argument("--exposures", action="append", type=_parse_exposure, metavar="LAYER:BASIS:PATH")
    g.add_argument("--threshold", help="drop exposures below this reporting threshold")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _mode_args(p: argparse.ArgumentParser):
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--layer", choices=sorted(LAYER_BASES))
    p.add_argument("--basis")
    p.add_argument("--capital-basis", choices=("raw", "modified"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multiplex-contagion",
                                     description="Impact-structure risk analysis and stabilisation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate an input portfolio and write a normalised copy")
    _common(p)

    p = sub.add_parser("generate", help="write a synthetic portfolio")
    _common(p)

    p = sub.add_parser("analyze", help="risk/resilience and impact indexes")
    _common(p)
    _mode_args(p)
    p.add_argument("--dot", action="store_true", default=None, help="write structure.dot")
    p.add_argument("--unfolded", action="store_true", default=None, help="write unfolded.csv")

    p = sub.add_parser("stabilize", help="minimum surcharge scale meeting a target")
    _common(p)
    _mode_args(p)
    t = p.add_mutually_exclusive_group()
    t.add_argument("--risk-target", type=float, help="required risk <= value (default 0)")
    t.add_argument("--resilience-target", type=float, help="required resilience >= value")
    p.add_argument("--search-tol", type=float)
    p.add_argument("--blend-nac-weight", type=float,
                   help="surcharge weights w*index(NAC) + (1-w)*index(EAD)")
    p.add_argument("--x-table", action="store_true", default=None, help="include the pairwise distribution")
    p.add_argument("--dot", action="store_true", default=None)
    p.add_argument("--unfolded", action="store_true", default=None)

    p = sub.add_parser("contagion", help="stepwise default cascades on the connected structure")
    _common(p)
    _mode_args(p)
    p.add_argument("--trigger", action="append", dest="triggers", metavar="ID[,ID...]",
                   help="seed set (repeatable); default: every single institution")
    p.add_argument("--traces", action="store_true", default=None, help="write trace_*.json files")

    p = sub.add_parser("compare", help="side-by-side ranks under two modes")
    _common(p)
    _mode_args(p)
    p.add_argument("--against", dest="compare_mode", choices=MODES)
    p.add_argument("--against-layer", dest="compare_layer", choices=sorted(LAYER_BASES))
    p.add_argument("--against-basis", dest="compare_basis")
    return parser


def load_config(args: argparse.Namespace) -> ScenarioConfig:
    data = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    names = {f.name for f in fields(ScenarioConfig)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    cfg = ScenarioConfig(**data)
    # command-line flags win over the file
    for name in names:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    # a layer given without a basis takes that layer's first basis
    for layer, basis in (("layer", "basis"), ("compare_layer", "compare_basis")):
        if getattr(args, basis, None) is None and basis not in data and getattr(cfg, layer) in LAYER_BASES:
            setattr(cfg, basis, LAYER_BASES[getattr(cfg, layer)][0])
    if getattr(args, "risk_target", None) is not None:
        cfg.target_kind, cfg.target_value = "risk", args.risk_target
    if getattr(args, "resilience_target", None) is not None:
        cfg.target_kind, cfg.target_value = "resilience", args.resilience_target
    if cfg.exposures:
        cfg.exposures = [tuple(e) for e in cfg.exposures]
    return cfg.validate()


def load_input(cfg: ScenarioConfig) -> Portfolio:
    if cfg.data_dir:
        portfolio = load_portfolio_dir(cfg.data_dir)
    elif cfg.institutions:
        portfolio = load_portfolio(cfg.institutions, cfg.exposures)
    else:
        portfolio = generate(cfg.generator_config())
    if cfg.threshold is not None:
        portfolio = apply_reporting_threshold(portfolio, cfg.threshold)
    return portfolio


def _input_echo(cfg: ScenarioConfig) -> dict:
    if cfg.uses_generator:
        return {"input": metadata(cfg.generator_config())}
    return {"input": {"portfolio": "files"}}


def _analysis(portfolio, cfg, mode=None, layer=None, basis=None):
    return analyze(portfolio, mode or cfg.mode, layer or cfg.layer, basis or cfg.basis, cfg.capital_basis)


def _exports(out: Path, analysis, cfg: ScenarioConfig):
    if cfg.dot:
        report.write_text(out / "structure.dot", report.structure_dot(analysis))
    if cfg.unfolded:
        report.write_text(out / "unfolded.csv", report.unfolded_csv(analysis))


def cmd_ingest(cfg: ScenarioConfig) -> int:
    portfolio = load_input(cfg)
    out = Path(cfg.out)
    save_portfolio(portfolio, out)
    sizes = {f"{layer}/{basis}": len(t) for (layer, basis), t in sorted(portfolio.exposures.items())}
    summary = {"n": portfolio.n, "tables": sizes, **_input_echo(cfg)}
    report.write_text(out / "ingest.json", report.dumps(summary))
    print(f"{portfolio.n} institutions; " + ", ".join(f"{k}: {v}" for k, v in sizes.items()))
    return EXIT_OK


def cmd_generate(cfg: ScenarioConfig) -> int:
    if not cfg.uses_generator:
        raise ConfigError("generate takes a generator config, not input files")
    portfolio = write_generated(cfg.generator_config(), cfg.out)
    print(f"wrote {portfolio.n} institutions to {cfg.out}")
    return EXIT_OK


def cmd_analyze(cfg: ScenarioConfig) -> int:
    portfolio = load_input(cfg)
    a = _analysis(portfolio, cfg)
    out = Path(cfg.out)
    rep = report.analysis_report(a, extra=_input_echo(cfg))
    report.write_report(out, rep)
    _exports(out, a, cfg)
    sys.stdout.write(report.render_text(rep))
    return EXIT_OK


def _blended_indexes(portfolio, cfg, a_ead):
    a_nac = _analysis(portfolio, cfg, basis="NAC")
    if a_nac.core != a_ead.core:
        raise StabilisationError("NAC and EAD cores differ; blended indexes are undefined")
    return blend_indexes(a_nac.core_indexes, a_ead.core_indexes, cfg.blend_nac_weight)


def cmd_stabilize(cfg: ScenarioConfig) -> int:
    portfolio = load_input(cfg)
    if cfg.blend_nac_weight is not None and (cfg.layer, cfg.basis) != ("D", "EAD"):
        raise ConfigError("blended indexes need the derivatives EAD basis")
    a = _analysis(portfolio, cfg)
    weights = _blended_indexes(portfolio, cfg, a) if cfg.blend_nac_weight is not None else None
    plan = stabilise(a, Target(cfg.target_kind, cfg.target_value), cfg.search_tol, weights)
    out = Path(cfg.out)
    rep = report.analysis_report(a, plan, extra=_input_echo(cfg))
    report.write_report(out, rep)
    report.write_text(out / "plan.json",
                      report.dumps(report.plan_to_dict(plan, a.ids, cfg.x_table)))
    _exports(out, a, cfg)
    sys.stdout.write(report.render_text(rep))
    return EXIT_OK


def _trigger_sets(cfg, a) -> list[tuple[int, ...]] | str:
    if not cfg.triggers:
        return "all-singletons"
    pos = {a.ids[k]: p for p, k in enumerate(a.core)}
    sets = []
    for item in cfg.triggers:
        names = item.split(",") if isinstance(item, str) else list(item)
        missing = [x for x in names if x not in pos]
        if missing:
            raise ConfigError(f"trigger ids outside the connected core: {missing}")
        sets.append(tuple(pos[x] for x in names))
    return sets


def cmd_contagion(cfg: ScenarioConfig) -> int:
    portfolio = load_input(cfg)
    a = _analysis(portfolio, cfg)
    multiplex = isinstance(a.structure, MultiplexImpactTensor)
    m = a.m
    groups = [v % m for v in range(3 * m)] if multiplex else None
    core_ids = [a.ids[k] for k in a.core]
    labels = report.node_labels(a)
    # tiny starting values 1/C_modified; they are ignored at the first step
    pi0 = 1.0 / np.asarray(a.modcap.modified_funds)
    if multiplex:
        pi0 = np.tile(pi0, 3)
    family = _trigger_sets(cfg, a)
    summaries = sweep_triggers(a.matrix, a.p_min, family, groups)
    out = Path(cfg.out)
    rows = []
    for t in summaries:
        trace = simulate_stepwise(a.matrix, a.p_min, t.seeds, pi0, groups)
        doc = report.trace_to_dict(trace, labels, a.p_min, core_ids)
        seed_names = doc["seeds"]
        rows.append({"seeds": seed_names, "failures": t.failures, "q_stop": t.q_stop,
                     "outcome": t.outcome})
        if cfg.traces:
            report.write_text(out / f"trace_{'_'.join(seed_names)}.json", report.dumps(doc))
    rep = report.analysis_report(a, extra={"triggers": rows, **_input_echo(cfg)})
    text = report.render_text(rep) + "\n" + "".join(
        f"{'+'.join(r['seeds']):<24} failures {r['failures']:>3}  q_stop {r['q_stop']:>3}  {r['outcome']}\n"
        for r in rows)
    report.write_report(out, rep, text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_compare(cfg: ScenarioConfig) -> int:
    portfolio = load_input(cfg)
    first = _analysis(portfolio, cfg)
    second = _analysis(portfolio, cfg, cfg.compare_mode, cfg.compare_layer, cfg.compare_basis)
    table = report.compare_modes(first, second)
    table.update(_input_echo(cfg))
    text = report.render_compare_text(table)
    report.write_report(Path(cfg.out), table, text)
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "generate": cmd_generate, "analyze": cmd_analyze,
            "stabilize": cmd_stabilize, "contagion": cmd_contagion, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except ParseError as exc:
        log.error("%s", exc)
        return EXIT_PARSE
    except (ValidationError, GeneratorConfigError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except NonConvergenceError as exc:
        log.error("%s", exc)
        return EXIT_NONCONVERGENCE
    except UnachievableTargetError as exc:
        log.error("%s", exc)
        return EXIT_UNACHIEVABLE
    except NonMonotoneError as exc:
        log.error("%s (gammas %s, lambdas %s)", exc, exc.gammas, exc.lambdas)
        return EXIT_NONMONOTONE
    except StabilisationError as exc:
        log.error("%s", exc)
        return EXIT_STABILISATION
    except (EmptyStructureError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
