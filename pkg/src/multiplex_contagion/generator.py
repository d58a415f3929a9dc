"""Seeded synthetic portfolios with a two-tier (hub/periphery) structure."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from decimal import Decimal
from pathlib import Path

import numpy as np

from .portfolio import (DEFAULT_SCALE, LAYER_BASES, LAYERS, InstitutionRecord, LayerExposures,
                        Portfolio, quantize, save_portfolio)

RNG_ALGORITHM = "numpy.random.Generator(PCG64)"


class GeneratorConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    n: int = 22
    seed: int = 0
    density: dict = field(default_factory=lambda: {"FI": 0.22, "SF": 0.18, "D": 0.24})
    hub_fraction: float = 0.3
    hub_weight: float = 2.5
    periphery_weight: float = 0.6
    capital_scale: float = 10_000.0
    capital_dispersion: float = 1.0
    p_min_band: tuple = (0.12, 0.18)
    p_ratio_spread: float = 4.0
    exposure_scale: dict = field(default_factory=lambda: {"FI": 0.008, "SF": 0.008, "D": 0.02})
    exposure_dispersion: float = 0.8
    counterparty_size_weight: float = 0.5
    hubs_by_size: bool = True
    reciprocity: float = 0.5
    min_out_degree: int = 1
    lender_fraction: float = 0.1
    nac_ratio: tuple = (0.05, 0.6)
    nac_zero_probability: float = 0.2
    decimal_scale: int = DEFAULT_SCALE

    def __post_init__(self):
        object.__setattr__(self, "density", dict(self.density))
        object.__setattr__(self, "exposure_scale", dict(self.exposure_scale))
        object.__setattr__(self, "p_min_band", tuple(self.p_min_band))
        object.__setattr__(self, "nac_ratio", tuple(self.nac_ratio))
        self.validate()

    def validate(self):
        if self.n < 2:
            raise GeneratorConfigError("n must be at least 2")
        if not 0 <= self.seed < 2**64:
            raise GeneratorConfigError("seed must be a 64-bit unsigned value")
        for layer in LAYERS:
            d = self.density.get(layer)
            if d is None or not 0 <= d <= 1:
                raise GeneratorConfigError(f"density for {layer} must lie in [0, 1]")
            if self.exposure_scale.get(layer, -1) < 0:
                raise GeneratorConfigError(f"exposure scale for {layer} must be non-negative")
        lo, hi = self.p_min_band
        if not 0 < lo <= hi <= 1:
            raise GeneratorConfigError(f"p_min band {self.p_min_band} is empty or outside (0, 1]")
        if self.p_ratio_spread < 1:
            raise GeneratorConfigError("p-ratio spread must be at least 1")
        if lo * self.p_ratio_spread > 1:
            raise GeneratorConfigError("p_min band times the p-ratio spread exceeds 1")
        if not 0 <= self.min_out_degree < self.n:
            raise GeneratorConfigError("min out-degree must lie in [0, n)")
        if not 0 <= self.counterparty_size_weight <= 1:
            raise GeneratorConfigError("counterparty size weight must lie in [0, 1]")
        if not 0 <= self.lender_fraction <= 1 - self.hub_fraction:
            raise GeneratorConfigError("lender fraction must fit beside the hubs")
        if not 0 <= self.hub_fraction <= 1 or self.hub_weight < 0 or self.periphery_weight < 0:
            raise GeneratorConfigError("invalid tier parameters")
        a, b = self.nac_ratio
        if not 0 <= a <= b <= 1:
            raise GeneratorConfigError("NAC ratio range must lie within [0, 1]")
        if not 0 <= self.nac_zero_probability <= 1 or not 0 <= self.reciprocity <= 1:
            raise GeneratorConfigError("probabilities must lie in [0, 1]")
        if self.capital_scale <= 0 or self.capital_dispersion < 0 or self.exposure_dispersion < 0:
            raise GeneratorConfigError("capital/exposure scales must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_min_band"] = list(self.p_min_band)
        d["nac_ratio"] = list(self.nac_ratio)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> GeneratorConfig:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise GeneratorConfigError(f"unknown generator fields: {sorted(unknown)}")
        return cls(**data)


def _edge_probabilities(cfg: GeneratorConfig, weights: np.ndarray, density: float) -> np.ndarray:
    P = np.outer(weights, weights)
    np.fill_diagonal(P, 0.0)
    mean = P.sum() / (cfg.n * (cfg.n - 1))
    if mean == 0:
        return P
    return np.clip(P * density / mean, 0.0, 1.0)


def generate(config: GeneratorConfig) -> Portfolio:
    """Draw one portfolio; identical configs give identical portfolios."""
    cfg = config
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    n = cfg.n
    q = lambda x: quantize(Decimal(repr(float(x))), cfg.decimal_scale)
    ids = [f"B{k + 1:02d}" for k in range(n)]

    own = cfg.capital_scale * rng.lognormal(0.0, cfg.capital_dispersion, n)
    p_min = rng.uniform(*cfg.p_min_band)
    t = rng.uniform(0.0, 1.0, n)
    order = rng.permutation(n)
    t[order[0]], t[order[1]] = 0.0, 1.0
    p = p_min * cfg.p_ratio_spread ** t
    institutions = []
    for k in range(n):
        c = q(own[k])
        if c <= 0:
            c = Decimal(1).scaleb(-cfg.decimal_scale) * 100
        mc = q(float(c) * (1.0 - p[k]))
        if mc >= c:
            mc = c - Decimal(1).scaleb(-cfg.decimal_scale)
        institutions.append(InstitutionRecord(ids[k], c, max(mc, Decimal(0))))
    cap = np.array([float(i.own_funds) for i in institutions])

    n_hub = int(round(cfg.hub_fraction * n))
    if cfg.hubs_by_size:
        hubs = set(np.argsort(-cap, kind="stable")[:n_hub].tolist())
    else:
        hubs = set(rng.permutation(n)[:n_hub].tolist())
    weights = np.array([cfg.hub_weight if k in hubs else cfg.periphery_weight for k in range(n)])
    # lenders: periphery institutions nobody reports an exposure to
    periphery = [k for k in range(n) if k not in hubs]
    n_lend = int(round(cfg.lender_fraction * n))
    lenders = rng.permutation(periphery)[:n_lend].tolist()

    b = cfg.counterparty_size_weight

    def amount(reporter: int, counterparty: int, layer: str) -> float:
        size = cap[reporter] ** (1 - b) * cap[counterparty] ** b
        return size * cfg.exposure_scale[layer] * rng.lognormal(0.0, cfg.exposure_dispersion)

    tables = {}
    for layer in LAYERS:
        prob = _edge_probabilities(cfg, weights, cfg.density[layer])
        draws = rng.uniform(size=(n, n))
        edges = draws < prob
        np.fill_diagonal(edges, False)
        edges[:, lenders] = False
        # top up sparse reporters with counterparties drawn by attachment weight
        for j in range(n):
            short = cfg.min_out_degree - int(edges[j].sum())
            if short > 0:
                allowed = np.ones(n, dtype=bool)
                allowed[[j, *lenders]] = False
                free = np.flatnonzero(~edges[j] & allowed)
                w = weights[free] / weights[free].sum()
                edges[j, rng.choice(free, size=min(short, free.size), replace=False, p=w)] = True
        if layer == "D":
            ead, nac = {}, {}
            for j in range(n):
                for i in range(n):
                    if not edges[j, i]:
                        continue
                    e = q(amount(j, i, layer))
                    ratio = rng.uniform(*cfg.nac_ratio)
                    zero = rng.uniform() < cfg.nac_zero_probability
                    if e <= 0:
                        continue
                    ead[(ids[j], ids[i])] = e
                    if not zero:
                        v = min(q(float(e) * ratio), e)
                        if v > 0:
                            nac[(ids[j], ids[i])] = v
            tables[("D", "EAD")] = LayerExposures("D", "EAD", ead)
            tables[("D", "NAC")] = LayerExposures("D", "NAC", nac)
        else:
            basis = LAYER_BASES[layer][0]
            gross = {}
            for j in range(n):
                for i in range(n):
                    if not edges[j, i]:
                        continue
                    e = q(amount(j, i, layer))
                    if e > 0:
                        gross[(ids[j], ids[i])] = e
                    # a reverse gross position makes the bilateral net smaller
                    if (rng.uniform() < cfg.reciprocity and j not in lenders
                            and (ids[i], ids[j]) not in gross):
                        r = q(amount(i, j, layer) * rng.uniform(0.0, 1.0))
                        if r > 0:
                            gross[(ids[i], ids[j])] = r
            tables[(layer, basis)] = LayerExposures(layer, basis, gross)
    return Portfolio(tuple(institutions), tables, f"synthetic-seed-{cfg.seed}")


def metadata(config: GeneratorConfig) -> dict:
    return {"generator": config.to_dict(), "rng": RNG_ALGORITHM}


def write_generated(config: GeneratorConfig, directory: str | Path) -> Portfolio:
    """Generate, write the CSV set plus a ``generator.json`` sidecar."""
    portfolio = generate(config)
    directory = Path(directory)
    save_portfolio(portfolio, directory)
    (directory / "generator.json").write_text(json.dumps(metadata(config), indent=2, sort_keys=True) + "\n",
                                              encoding="utf-8")
    return portfolio
