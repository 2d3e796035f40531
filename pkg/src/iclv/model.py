"""Declarative model specification and the flat named parameter vector.

A ModelSpec describes utilities (ASCs plus attribute coefficients), latent
variables (structural regressors and the alternatives their loading enters),
and the ordered measurement block. Parameters are held in a flat vector with
dotted role-prefixed names:

    asc.<alt>                 alternative-specific constant (base fixed at 0)
    beta.<name>               utility coefficient, generic or per-alternative
    lambda.<latent>[.<alt>]   latent-to-utility coefficient
    zeta.<latent>             structural intercept (fixed at 0 by default)
    struct.<latent>.<zvar>    structural coefficient on a socio-demographic
    sigma.<latent>            structural disturbance scale (fixed at 1)
    gamma.<indicator>         measurement intercept (fixed at 0 by default)
    load.<indicator>          measurement loading
    thr.<indicator>.1         first threshold
    thr.<indicator>.<x>       log-increment of threshold x (x >= 2)

Model files use a sectioned key-value text format; see parse_model_file.
"""

import fnmatch
from dataclasses import dataclass, field

import numpy as np

from .data import ColumnMap
from .draws import DrawPlan


class ModelSpecError(ValueError):
    """Raised for inconsistent model specifications or malformed spec files."""


@dataclass(frozen=True)
class UtilityTerm:
    param: str
    attribute: str
    alternatives: tuple


@dataclass(frozen=True)
class LatentDef:
    name: str
    regressors: tuple
    alternatives: tuple      # alternatives whose utility receives the latent
    per_alt_lambda: bool = False


@dataclass(frozen=True)
class ModelSpec:
    alternatives: tuple
    base: str
    terms: tuple = ()
    latents: tuple = ()
    indicators: tuple = ()   # (indicator_name, latent_name) pairs, ordered
    n_categories: int = 5
    fixed: tuple = ()        # (name-or-glob, value) pairs
    columns: ColumnMap = field(default_factory=ColumnMap)

    def __post_init__(self):
        if self.base not in self.alternatives:
            raise ModelSpecError(f"base '{self.base}' is not an alternative")
        if len(set(self.alternatives)) != len(self.alternatives):
            raise ModelSpecError("duplicate alternative labels")
        latent_names = [l.name for l in self.latents]
        if len(set(latent_names)) != len(latent_names):
            raise ModelSpecError("duplicate latent variable names")
        for term in self.terms:
            for alt in term.alternatives:
                if alt not in self.alternatives:
                    raise ModelSpecError(
                        f"term {term.param}: unknown alternative '{alt}'")
        for latent in self.latents:
            for alt in latent.alternatives:
                if alt not in self.alternatives:
                    raise ModelSpecError(
                        f"latent {latent.name}: unknown alternative '{alt}'")
        for ind, lat in self.indicators:
            if lat not in latent_names:
                raise ModelSpecError(f"indicator {ind}: unknown latent '{lat}'")

    @property
    def latent_names(self):
        return tuple(l.name for l in self.latents)

    def latent(self, name):
        for l in self.latents:
            if l.name == name:
                return l
        raise KeyError(name)

    def indicator_names(self):
        return tuple(ind for ind, _ in self.indicators)

    def indicators_of(self, latent):
        return tuple(ind for ind, lat in self.indicators if lat == latent)

    def attribute_names(self):
        seen = dict.fromkeys(t.attribute for t in self.terms)
        return tuple(seen)

    def lambda_params(self):
        """(param, latent, alternatives) triples for latent utility terms."""
        out = []
        for latent in self.latents:
            if latent.per_alt_lambda:
                for alt in latent.alternatives:
                    out.append((f"lambda.{latent.name}.{alt}", latent.name, (alt,)))
            else:
                out.append((f"lambda.{latent.name}", latent.name, latent.alternatives))
        return tuple(out)


class ParameterVector:
    """Ordered named parameters with a free/fixed mask.

    Fixed entries keep their value during estimation; the free subvector is
    what optimizers see.
    """

    def __init__(self, names, values, free=None):
        self.names = tuple(names)
        self.values = np.asarray(values, dtype=float).copy()
        if len(self.names) != self.values.size:
            raise ModelSpecError("parameter names and values disagree in length")
        self.free = (np.ones(self.values.size, dtype=bool)
                     if free is None else np.asarray(free, dtype=bool).copy())
        self._index = {n: i for i, n in enumerate(self.names)}

    def __len__(self):
        return self.values.size

    def __contains__(self, name):
        return name in self._index

    def __getitem__(self, name):
        return float(self.values[self._index[name]])

    def index(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise ModelSpecError(f"unknown parameter id '{name}'") from None

    def copy(self):
        return ParameterVector(self.names, self.values, self.free)

    def with_values(self, mapping):
        out = self.copy()
        for name, value in mapping.items():
            out.values[out.index(name)] = value
        return out

    def fix(self, pattern, value=None):
        """Fix all parameters matching a glob pattern, optionally setting them."""
        hit = False
        out = self.copy()
        for i, name in enumerate(out.names):
            if fnmatch.fnmatchcase(name, pattern):
                out.free[i] = False
                if value is not None:
                    out.values[i] = value
                hit = True
        if not hit:
            raise ModelSpecError(f"fix pattern '{pattern}' matches no parameter")
        return out

    def free_names(self):
        return tuple(n for n, f in zip(self.names, self.free) if f)

    def free_values(self):
        return self.values[self.free].copy()

    def with_free_values(self, x):
        out = self.copy()
        out.values[out.free] = x
        return out

    def n_free(self):
        return int(self.free.sum())

    def to_dict(self):
        return dict(zip(self.names, self.values.tolist()))


def build_parameters(spec):
    """Canonical ParameterVector for a spec, all values 0 except scales.

    Identification defaults: base ASC absent, sigma fixed at 1, structural
    intercepts and measurement intercepts fixed at 0 (locations are carried by
    the structural coefficients and thresholds).
    """
    names, values, free = [], [], []

    def add(name, value=0.0, is_free=True):
        names.append(name)
        values.append(value)
        free.append(is_free)

    for alt in spec.alternatives:
        if alt != spec.base:
            add(f"asc.{alt}")
    for term in spec.terms:
        add(term.param)
    for param, _, _ in spec.lambda_params():
        add(param)
    for latent in spec.latents:
        add(f"zeta.{latent.name}", 0.0, False)
        for z in latent.regressors:
            add(f"struct.{latent.name}.{z}")
        add(f"sigma.{latent.name}", 1.0, False)
    for ind, _ in spec.indicators:
        add(f"gamma.{ind}", 0.0, False)
        add(f"load.{ind}")
        add(f"thr.{ind}.1")
        for x in range(2, spec.n_categories):
            add(f"thr.{ind}.{x}", 0.0)
    pv = ParameterVector(names, values, free)
    for pattern, value in spec.fixed:
        pv = pv.fix(pattern, value)
    return pv


def thresholds(params, indicator, n_categories=5):
    """Strictly increasing thresholds tau^1 < ... < tau^(X-1).

    tau^1 is free; increments are exponentials of unconstrained parameters,
    so monotonicity holds for every admissible vector.
    """
    tau = np.empty(n_categories - 1)
    tau[0] = params[f"thr.{indicator}.1"]
    for x in range(2, n_categories):
        tau[x - 1] = tau[x - 2] + np.exp(params[f"thr.{indicator}.{x}"])
    if not np.all(np.diff(tau) > 0):
        raise ModelSpecError(f"thresholds for {indicator} are not increasing")
    return tau


# ---------------------------------------------------------------------------
# Model file format
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptimizerOptions:
    max_iterations: int = 2000
    gradient_tol: float = 1e-5       # max-norm convergence threshold
    relative_ll_tol: float = 1e-9
    hessian_step: float = 1e-4
    robust_se: bool = False
    standard_errors: bool = True     # False skips the finite-difference Hessian
    trace_ll: bool = False           # record the accepted log-likelihood path
    observation_unit: str = "tasks"  # or "tasks_and_indicators", for BIC's N


@dataclass(frozen=True)
class ModelFile:
    spec: ModelSpec
    plan: DrawPlan
    options: OptimizerOptions
    start: dict = field(default_factory=dict)


def _parse_sections(text, source):
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections.setdefault(current, [])
            continue
        if current is None:
            raise ModelSpecError(f"{source}:{lineno}: entry before any [section]")
        if "=" not in line:
            raise ModelSpecError(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        sections[current].append((lineno, key.strip(), value.strip()))
    return sections


def parse_model_file(path):
    """Parse the sectioned key-value model file into a ModelFile."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_model_text(text, source=str(path))


def parse_model_text(text, source="<model>"):
    sections = _parse_sections(text, source)

    def err(lineno, msg):
        raise ModelSpecError(f"{source}:{lineno}: {msg}")

    alts, base = None, None
    for lineno, key, value in sections.get("alternatives", []):
        if key == "labels":
            alts = tuple(value.split())
        elif key == "base":
            base = value
        else:
            err(lineno, f"unknown key '{key}' in [alternatives]")
    if not alts:
        raise ModelSpecError(f"{source}: missing [alternatives] labels")
    if base is None:
        raise ModelSpecError(f"{source}: missing [alternatives] base")

    terms = []
    for lineno, key, value in sections.get("utility", []):
        if "@" not in value:
            err(lineno, f"term '{key}': expected '<attribute> @ <alt> [<alt> ...]'")
        attribute, alt_part = (s.strip() for s in value.split("@", 1))
        term_alts = tuple(alt_part.split())
        if not attribute or not term_alts:
            err(lineno, f"term '{key}': empty attribute or alternative list")
        terms.append(UtilityTerm(key, attribute, term_alts))

    latents = []
    for lineno, key, value in sections.get("latents", []):
        regressors, enters, per_alt = (), (), False
        for clause in value.split(";"):
            clause = clause.strip()
            if not clause:
                continue
            if ":" not in clause:
                err(lineno, f"latent '{key}': expected 'regressors: ...' clauses")
            cname, cval = (s.strip() for s in clause.split(":", 1))
            if cname == "regressors":
                regressors = tuple(cval.split())
            elif cname == "enters":
                enters = tuple(cval.split())
            elif cname == "lambda":
                per_alt = cval == "per_alternative"
                if cval not in ("shared", "per_alternative"):
                    err(lineno, f"latent '{key}': lambda must be shared or per_alternative")
            else:
                err(lineno, f"latent '{key}': unknown clause '{cname}'")
        latents.append(LatentDef(key, regressors, enters, per_alt))

    indicators = []
    for lineno, key, value in sections.get("measurement", []):
        indicators.append((key, value))

    colmap = {}
    for lineno, key, value in sections.get("data", []):
        if key not in ("respondent", "task", "alternative", "available", "chosen"):
            err(lineno, f"unknown key '{key}' in [data]")
        colmap[key] = value
    columns = ColumnMap(**colmap)

    fixed = []
    for lineno, key, value in sections.get("constraints", []):
        try:
            fixed.append((key, float(value)))
        except ValueError:
            err(lineno, f"constraint '{key}': value '{value}' is not a number")

    plan_kwargs = {}
    for lineno, key, value in sections.get("draws", []):
        if key in ("count", "draws"):
            plan_kwargs["draws"] = int(value)
        elif key == "sequence":
            plan_kwargs["sequence"] = value
        elif key == "seed":
            plan_kwargs["seed"] = int(value)
        elif key == "skip":
            plan_kwargs["skip"] = int(value)
        elif key == "unit":
            plan_kwargs["unit"] = value
        else:
            err(lineno, f"unknown key '{key}' in [draws]")
    plan = DrawPlan(**plan_kwargs)

    opt_kwargs = {}
    for lineno, key, value in sections.get("optimizer", []):
        if key == "max_iterations":
            opt_kwargs["max_iterations"] = int(value)
        elif key == "gradient_tol":
            opt_kwargs["gradient_tol"] = float(value)
        elif key == "relative_ll_tol":
            opt_kwargs["relative_ll_tol"] = float(value)
        elif key == "hessian_step":
            opt_kwargs["hessian_step"] = float(value)
        elif key == "robust_se":
            opt_kwargs["robust_se"] = value.lower() in ("1", "true", "yes")
        elif key == "observation_unit":
            opt_kwargs["observation_unit"] = value
        else:
            err(lineno, f"unknown key '{key}' in [optimizer]")
    options = OptimizerOptions(**opt_kwargs)

    start = {}
    for lineno, key, value in sections.get("start", []):
        try:
            start[key] = float(value)
        except ValueError:
            err(lineno, f"start value for '{key}' is not a number")

    spec = ModelSpec(alternatives=alts, base=base, terms=tuple(terms),
                     latents=tuple(latents), indicators=tuple(indicators),
                     fixed=tuple(fixed), columns=columns)
    return ModelFile(spec=spec, plan=plan, options=options, start=start)


def write_model_file(mf, path):
    """Serialize a ModelFile back to the sectioned key-value format."""
    lines = ["[alternatives]",
             f"labels = {' '.join(mf.spec.alternatives)}",
             f"base = {mf.spec.base}",
             "",
             "[utility]"]
    for term in mf.spec.terms:
        lines.append(f"{term.param} = {term.attribute} @ {' '.join(term.alternatives)}")
    if mf.spec.latents:
        lines += ["", "[latents]"]
        for latent in mf.spec.latents:
            mode = "per_alternative" if latent.per_alt_lambda else "shared"
            lines.append(
                f"{latent.name} = regressors: {' '.join(latent.regressors)} ; "
                f"enters: {' '.join(latent.alternatives)} ; lambda: {mode}")
    if mf.spec.indicators:
        lines += ["", "[measurement]"]
        for ind, lat in mf.spec.indicators:
            lines.append(f"{ind} = {lat}")
    if mf.spec.fixed:
        lines += ["", "[constraints]"]
        for pattern, value in mf.spec.fixed:
            lines.append(f"{pattern} = {value!r}")
    lines += ["", "[draws]",
              f"count = {mf.plan.draws}",
              f"sequence = {mf.plan.sequence}",
              f"seed = {mf.plan.seed}",
              f"skip = {mf.plan.skip}",
              f"unit = {mf.plan.unit}"]
    o = mf.options
    lines += ["", "[optimizer]",
              f"max_iterations = {o.max_iterations}",
              f"gradient_tol = {o.gradient_tol!r}",
              f"relative_ll_tol = {o.relative_ll_tol!r}",
              f"hessian_step = {o.hessian_step!r}",
              f"robust_se = {str(o.robust_se).lower()}",
              f"observation_unit = {o.observation_unit}"]
    if mf.start:
        lines += ["", "[start]"]
        for k, v in mf.start.items():
            lines.append(f"{k} = {v!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
