"""Policy-gradient optimization toward nearly Blackwell optimal policies."""

from ._core import (
    MdpModel,
    Env,
    action_probabilities,
    bias_fisher_analytic,
    bias_fisher_sampling_enabler,
    bias_gradient,
    builtin,
    builtin_names,
    devmat_fisher,
    discounted_fisher,
    discounted_gradient,
    discounted_value,
    enumerate_deterministic,
    evaluate,
    gain_fisher,
    gain_gradient,
    induced_chain,
    load_env,
    optimize_bias_only,
    optimize_discounted,
    optimize_nbw,
    optimize_penalty,
    run_alg2,
    save_env,
    sweep,
    validate_model,
)

__all__ = [
    "MdpModel",
    "Env",
    "action_probabilities",
    "bias_fisher_analytic",
    "bias_fisher_sampling_enabler",
    "bias_gradient",
    "builtin",
    "builtin_names",
    "devmat_fisher",
    "discounted_fisher",
    "discounted_gradient",
    "discounted_value",
    "enumerate_deterministic",
    "evaluate",
    "gain_fisher",
    "gain_gradient",
    "induced_chain",
    "load_env",
    "optimize_bias_only",
    "optimize_discounted",
    "optimize_nbw",
    "optimize_penalty",
    "run_alg2",
    "save_env",
    "sweep",
    "validate_model",
]
