"""Impact-structure contagion analysis for single-layer and multiplex interbank systems."""
from .analysis import Analysis, analyze, analyze_multiplex, analyze_single, stabilise
from .connectivity import SccResult, extract_connected, multiplex_core, tarjan_scc
from .contagion import ContagionTrace, propagate_linear, simulate_multiplex, simulate_stepwise, sweep_triggers
from .generator import GeneratorConfig, generate
from .impact import ModifiedCapital, build_layer, compute_modified_capital
from .portfolio import InstitutionRecord, LayerExposures, Portfolio, load_portfolio, load_portfolio_dir
from .spectral import RiskAssessment, assess, power_iterate, risk_measures
from .stabilisation import (StabilisationPlan, Target, optimize_gamma, rebalance_multiplex,
                            rebalance_single, rebalance_with_deduction)
from .tensor import MultiplexImpactTensor, build_multiplex, fold, fold_eigenvector, unfold

__version__ = "0.1.0"
