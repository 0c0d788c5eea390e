"""Experiment configuration: a strict, flat, sectioned key-value format.

Three sections: [model], [covariate], [run].  Scalars are typed per key,
vectors are comma lists, functional coefficients are compact strings

    const:c | affine:a,b[,lo,hi] | logistic:lo,hi,a,b | identity

and a bare number is shorthand for const.  Unknown sections or keys are
rejected outright so a typo in a mathematical parameter cannot silently
fall back to a default.  ``serialize`` emits a canonical form that parses
back to an identical configuration (floats are written with 17 significant
digits).
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, fields

from .models import (ApGarchX, ArArchBenchmark, BinaryChoice, Categorical, Charn,
                     Coef, LinearRandomCoef, ModelSpec, Parx)
from .noise import ConfigurationError, CovariateSpec, provably_nonnegative

COMMANDS = ("simulate", "check", "lyapunov", "dependence", "clt",
            "coalescence", "counterexample")


@dataclass(frozen=True)
class RunConfig:
    command: str = "check"
    seed: int = 12345
    n: int = 1000
    replicates: int = 500
    tol: float = 1e-8
    t_max: int = 64
    burn: int | None = None
    s_max: int = 1 << 15
    threads: int = 1
    functional: str = "identity"
    functional_exponent: float = 2.0
    functional_cap: float = 1e6
    functional_lag: int = 1
    moment_order: float | None = None
    moment_bound: float | None = None
    coalescence_cap: int = 512
    horizons: tuple = ()
    forward_burn: int = 200

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}")
        if self.n < 1 or self.replicates < 1:
            raise ConfigurationError("n and replicates must be positive")
        if self.tol <= 0:
            raise ConfigurationError("tol must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    covariate: CovariateSpec
    run: RunConfig


# ---------------------------------------------------------------------------
# value codecs
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.17g}"
    return str(x)


def _parse_float(s: str, key: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ConfigurationError(f"key {key!r}: expected a number, got {s!r}") from None


def _parse_int(s: str, key: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise ConfigurationError(f"key {key!r}: expected an integer, got {s!r}") from None


def _parse_vector(s: str, key: str) -> tuple:
    s = s.strip()
    if not s:
        return ()
    return tuple(_parse_float(part.strip(), key) for part in s.split(","))


def _coef_to_str(c: Coef) -> str:
    if c.kind == "const":
        return f"const:{_fmt(c.params[0])}"
    if c.kind == "affine":
        a, b, lo, hi = c.params
        if math.isinf(lo) and math.isinf(hi):
            return f"affine:{_fmt(a)},{_fmt(b)}"
        return f"affine:{_fmt(a)},{_fmt(b)},{_fmt(lo)},{_fmt(hi)}"
    lo, hi, a, b = c.params
    return f"logistic:{_fmt(lo)},{_fmt(hi)},{_fmt(a)},{_fmt(b)}"


def _parse_coef(s: str, key: str) -> Coef:
    s = s.strip()
    if s == "identity":
        return Coef.identity()
    if ":" not in s:
        return Coef.const(_parse_float(s, key))
    kind, _, rest = s.partition(":")
    vals = _parse_vector(rest, key)
    kind = kind.strip()
    if kind == "const" and len(vals) == 1:
        return Coef.const(vals[0])
    if kind == "affine" and len(vals) in (2, 4):
        return Coef.affine(*vals)
    if kind == "logistic" and len(vals) == 4:
        return Coef.logistic(*vals)
    raise ConfigurationError(f"key {key!r}: malformed coefficient {s!r}")


def _coef_list_to_str(coefs) -> str:
    return "; ".join(_coef_to_str(c) for c in coefs)


def _parse_coef_list(s: str, key: str) -> tuple:
    parts = [p.strip() for p in s.split(";") if p.strip()]
    return tuple(_parse_coef(p, key) for p in parts)


# ---------------------------------------------------------------------------
# section schemas
# ---------------------------------------------------------------------------

_MODEL_KEYS = {
    "linear_random_coef": {"kappa": "coef", "o": "float", "p": "float"},
    "ar_arch_benchmark": {"a0": "coef", "a1": "coef", "b0": "coef", "b1": "coef"},
    "charn": {"q": "int", "theta_loc": "coefs", "theta_vol": "coefs",
              "power": "float", "p": "float"},
    "apgarch_x": {"q": "int", "power": "float", "pi": "vector", "beta": "vector",
                  "alpha_plus": "vector", "alpha_minus": "vector"},
    "parx": {"q": "int", "beta0": "float", "alpha": "vector", "beta": "vector",
             "pi": "vector"},
    "binary_choice": {"q": "int", "a": "vector", "pi": "vector",
                      "interaction_c": "vector", "interaction_a": "vector",
                      "interaction_b": "vector"},
    "categorical": {"q": "int", "n_categories": "int", "lag_weights": "vector",
                    "gamma": "vector"},
}

_COV_KEYS = {
    "dim": "int", "coefficients": "vector", "eta_law": "str", "eta_params": "vector",
    "eps_law": "str", "eps_params": "vector", "link": "str", "link_weight": "float",
    "truncation": "int", "chain_order": "int", "factor_law": "str",
    "factor_params": "vector", "box": "vector",
}

_RUN_KEYS = {
    "command": "str", "seed": "int", "n": "int", "replicates": "int", "tol": "float",
    "t_max": "int", "burn": "int", "s_max": "int", "threads": "int",
    "functional": "str", "functional_exponent": "float", "functional_cap": "float",
    "functional_lag": "int", "moment_order": "float", "moment_bound": "float",
    "coalescence_cap": "int", "horizons": "intvector", "forward_burn": "int",
}

_PARSERS = {
    "float": _parse_float,
    "int": _parse_int,
    "str": lambda s, key: s.strip(),
    "vector": _parse_vector,
    "intvector": lambda s, key: tuple(_parse_int(p.strip(), key) for p in s.split(",") if p.strip()),
    "coef": _parse_coef,
    "coefs": _parse_coef_list,
}


def _typed_items(section: dict, schema: dict, where: str) -> dict:
    out = {}
    for key, raw in section.items():
        if key == "family":
            out["family"] = raw.strip()
            continue
        if key not in schema:
            raise ConfigurationError(f"unknown key {key!r} in [{where}]")
        out[key] = _PARSERS[schema[key]](raw, f"{where}.{key}")
    return out


def _build_model(section: dict) -> ModelSpec:
    family = section.get("family", "").strip()
    if family not in _MODEL_KEYS:
        raise ConfigurationError(f"unknown model family {family!r} in [model]")
    vals = _typed_items(section, _MODEL_KEYS[family], "model")
    vals.pop("family")
    cls = {"linear_random_coef": LinearRandomCoef, "ar_arch_benchmark": ArArchBenchmark,
           "charn": Charn, "apgarch_x": ApGarchX, "parx": Parx,
           "binary_choice": BinaryChoice, "categorical": Categorical}[family]
    return cls(**vals)


def _build_covariate(section: dict) -> CovariateSpec:
    vals = _typed_items(section, _COV_KEYS, "covariate")
    vals.setdefault("family", "iid")
    if "link" in vals:
        vals["eps_eta_link"] = vals.pop("link")
    return CovariateSpec(**vals)


def _build_run(section: dict) -> RunConfig:
    vals = _typed_items(section, _RUN_KEYS, "run")
    vals.pop("family", None)
    if vals.get("burn", 0) is not None and vals.get("burn", 0) == -1:
        vals["burn"] = None
    return RunConfig(**vals)


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config does not parse: {exc}") from None
    known = {"model", "covariate", "run"}
    extra = set(cp.sections()) - known
    if extra:
        raise ConfigurationError(f"unknown section(s): {', '.join(sorted(extra))}")
    if "model" not in cp or "covariate" not in cp:
        raise ConfigurationError("config needs [model] and [covariate] sections")
    model = _build_model(dict(cp["model"]))
    cov = _build_covariate(dict(cp["covariate"]))
    run = _build_run(dict(cp["run"]) if "run" in cp else {})
    config = ExperimentConfig(model=model, covariate=cov, run=run)
    validate_experiment(config)
    return config


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def validate_experiment(config: ExperimentConfig) -> None:
    """Cross-checks between the model and covariate blocks."""
    spec, cov = config.model, config.covariate
    if spec.family == "categorical" and cov.eps_law != "uniform01":
        raise ConfigurationError("covariate.eps_law: categorical models read the kernel "
                                 "inverse from a uniform eps; set eps_law = uniform01")
    if spec.family == "binary_choice" and cov.eps_law not in ("gaussian", "logistic",
                                                              "uniform01"):
        raise ConfigurationError("covariate.eps_law: binary choice supports gaussian, "
                                 "logistic or uniform01 noise")
    if spec.family in ("apgarch_x", "parx") and any(x != 0 for x in spec.pi):
        if not provably_nonnegative(cov):
            raise ConfigurationError(
                "covariate.family: nonzero pi loadings require a covariate with "
                "provably nonnegative support")
    if spec.family in ("linear_random_coef", "ar_arch_benchmark", "charn"):
        coefs = _functional_coefs(spec)
        if any(not c.is_const() for c in coefs) and cov.dim != 1:
            raise ConfigurationError("covariate.dim: functional coefficients read a "
                                     "scalar covariate; set dim = 1")
    if spec.family == "categorical" and spec.gamma:
        spec.gammas(cov.dim)


def _functional_coefs(spec) -> tuple:
    if spec.family == "linear_random_coef":
        return (spec.kappa,)
    if spec.family == "ar_arch_benchmark":
        return (spec.a0, spec.a1, spec.b0, spec.b1)
    return tuple(spec.theta_loc) + tuple(spec.theta_vol)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def serialize(config: ExperimentConfig) -> str:
    spec, cov, run = config.model, config.covariate, config.run
    out = io.StringIO()
    out.write("[model]\n")
    out.write(f"family = {spec.family}\n")
    for key, typ in _MODEL_KEYS[spec.family].items():
        val = getattr(spec, key)
        if typ == "coef":
            out.write(f"{key} = {_coef_to_str(val)}\n")
        elif typ == "coefs":
            out.write(f"{key} = {_coef_list_to_str(val)}\n")
        elif typ == "vector":
            if val:
                out.write(f"{key} = {', '.join(_fmt(v) for v in val)}\n")
        else:
            out.write(f"{key} = {_fmt(val)}\n")

    out.write("\n[covariate]\n")
    out.write(f"family = {cov.family}\n")
    defaults = CovariateSpec()
    for key, typ in _COV_KEYS.items():
        attr = "eps_eta_link" if key == "link" else key
        val = getattr(cov, attr)
        if val == getattr(defaults, attr):
            continue
        if typ == "vector":
            out.write(f"{key} = {', '.join(_fmt(v) for v in val)}\n")
        else:
            out.write(f"{key} = {_fmt(val)}\n")

    out.write("\n[run]\n")
    run_defaults = RunConfig()
    for key in _RUN_KEYS:
        val = getattr(run, "command" if key == "command" else key)
        if key != "command" and val == getattr(run_defaults, key):
            continue
        if val is None:
            continue
        if key == "horizons":
            out.write(f"{key} = {', '.join(str(int(v)) for v in val)}\n")
        else:
            out.write(f"{key} = {_fmt(val)}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def preset(name: str) -> ExperimentConfig:
    """Ready-made configurations reproducing the documented scenarios."""
    try:
        factory = _PRESETS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown preset {name!r}; available: {', '.join(sorted(_PRESETS))}") from None
    return factory()


def _preset_linear_ar1() -> ExperimentConfig:
    return ExperimentConfig(
        model=LinearRandomCoef(kappa=Coef.const(0.5), p=3.0),
        covariate=CovariateSpec(family="iid", eta_law="gaussian"),
        run=RunConfig(command="clt", seed=20240601, n=100_000, replicates=8,
                      functional="identity"),
    )


def _preset_ar_arch_bench() -> ExperimentConfig:
    return ExperimentConfig(
        model=ArArchBenchmark(a0=Coef.affine(0.0, 0.3, -0.5, 0.5),
                              a1=Coef.const(0.5),
                              b0=Coef.const(0.3),
                              b1=Coef.const(0.56)),
        covariate=CovariateSpec(family="var1", coefficients=(0.5,)),
        run=RunConfig(command="clt", seed=20240602, n=10_000, replicates=500,
                      functional="identity", moment_order=2.4, moment_bound=1.6),
    )


def _preset_garch_iid() -> ExperimentConfig:
    return ExperimentConfig(
        model=ApGarchX(q=1, power=2.0, pi=(0.1,), beta=(0.5,),
                       alpha_plus=(0.2,), alpha_minus=(0.2,)),
        covariate=CovariateSpec(family="bounded_transform", coefficients=(0.5,),
                                box=(0.0, 1.0)),
        run=RunConfig(command="check", seed=20240603),
    )


def _preset_parx_var1() -> ExperimentConfig:
    return ExperimentConfig(
        model=Parx(q=1, beta0=1.0, alpha=(0.3,), beta=(0.5,), pi=(0.4,)),
        covariate=CovariateSpec(family="bounded_transform", coefficients=(0.5,),
                                box=(0.0, 1.0)),
        run=RunConfig(command="dependence", seed=20240604, t_max=40,
                      replicates=2000),
    )


def _preset_binary_recession() -> ExperimentConfig:
    return ExperimentConfig(
        model=BinaryChoice(q=2, a=(-0.5, 0.3), pi=(0.4,)),
        covariate=CovariateSpec(family="iid", eta_law="gaussian", eps_law="logistic"),
        run=RunConfig(command="coalescence", seed=20240605, replicates=1000),
    )


def _preset_coalescence_n3() -> ExperimentConfig:
    # lag weight log(3)/3 puts the smallest kernel mass at exactly 0.2
    s = math.log(3.0) / 3.0
    return ExperimentConfig(
        model=Categorical(q=1, n_categories=3, lag_weights=(s, 0.0, 0.0)),
        covariate=CovariateSpec(family="iid", eta_law="gaussian", eps_law="uniform01"),
        run=RunConfig(command="coalescence", seed=20240606, replicates=2000,
                      coalescence_cap=512),
    )


def _preset_counterexample_l1() -> ExperimentConfig:
    return ExperimentConfig(
        model=LinearRandomCoef(kappa=Coef.identity()),
        covariate=CovariateSpec(family="product_chain", chain_order=2,
                                factor_law="lognormal",
                                factor_params=(-1.0, 1.0954451150103321)),
        run=RunConfig(command="counterexample", seed=20240607, replicates=500,
                      horizons=(2, 4, 8, 12, 16, 24, 32)),
    )


def _preset_counterexample_l1_bounded() -> ExperimentConfig:
    return ExperimentConfig(
        model=LinearRandomCoef(kappa=Coef.identity()),
        covariate=CovariateSpec(family="product_chain", chain_order=2,
                                factor_law="uniform_scaled", factor_params=(0.95,)),
        run=RunConfig(command="counterexample", seed=20240608, replicates=500,
                      horizons=(2, 4, 8, 12, 16, 24, 32)),
    )


def _preset_charn_threshold() -> ExperimentConfig:
    return ExperimentConfig(
        model=Charn(q=2,
                    theta_loc=(Coef.const(0.0), Coef.const(0.3), Coef.const(0.15),
                               Coef.const(0.2), Coef.const(0.15)),
                    theta_vol=(Coef.const(0.25), Coef.const(0.09), Coef.const(0.04)),
                    power=2.0),
        covariate=CovariateSpec(family="iid", eta_law="gaussian"),
        run=RunConfig(command="check", seed=20240609),
    )


_PRESETS = {
    "linear_ar1": _preset_linear_ar1,
    "ar_arch_bench": _preset_ar_arch_bench,
    "garch_iid": _preset_garch_iid,
    "parx_var1": _preset_parx_var1,
    "binary_recession": _preset_binary_recession,
    "coalescence_n3": _preset_coalescence_n3,
    "counterexample_l1": _preset_counterexample_l1,
    "counterexample_l1_bounded": _preset_counterexample_l1_bounded,
    "charn_threshold": _preset_charn_threshold,
}

PRESET_NAMES = tuple(sorted(_PRESETS))
