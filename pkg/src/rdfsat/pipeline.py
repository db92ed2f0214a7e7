"""End-to-end decision: parse, normalize, arrange, reduce, solve, build, certify."""

from __future__ import annotations

import shutil
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .arranger import DEFAULT_ARRANGEMENT_CAP
from .normalizer import DEFAULT_BRANCH_CAP, desugar_constants, normalize
from .parser import parse
from .reducer import ReductionPath, reduction_paths
from .semantics import DEFAULT_TOLERANCE, ExplicitModel, Verdict, evaluate
from .syntax import function_vars, validate, variables
from .tarski import (
    DEFAULT_SOLVER_COMMAND, SOLVER_ENV, SearchBudget, SolveResult, SolverConfig,
    search_internal, solve_external,
)
from .witness import (
    DEFAULT_SAMPLES, CertificationReport, ModelConstructionFailure, PiecewiseModel,
    build_model, certify,
)

__all__ = ["Config", "Decision", "PathRecord", "decide", "default_solver", "solve_path"]


def default_solver() -> str | None:
    """The solver template to use when none is configured, or None."""
    import os
    if os.environ.get(SOLVER_ENV):
        return os.environ[SOLVER_ENV]
    return DEFAULT_SOLVER_COMMAND if shutil.which("z3") else None


@dataclass
class Config:
    solver: str | None = None          # command template; None means internal search only
    timeout: float = 30.0
    arrangement_cap: int = DEFAULT_ARRANGEMENT_CAP
    branch_cap: int = DEFAULT_BRANCH_CAP
    output_dir: Path | None = None
    samples: int = DEFAULT_SAMPLES
    tolerance: float = DEFAULT_TOLERANCE
    budget: SearchBudget = field(default_factory=SearchBudget)
    workers: int = 1

    def __post_init__(self):
        if self.arrangement_cap <= 0 or self.branch_cap <= 0:
            raise ValueError("caps must be positive")
        if not 0 < self.tolerance < 1:
            raise ValueError("tolerance must lie in (0, 1)")


@dataclass
class PathRecord:
    branch: int
    step1: int
    arrangement: str
    status: str
    solver: str
    wall_time: float
    transcript: str | None = None
    validated: bool = False


@dataclass
class Decision:
    status: str                               # sat | unsat | unknown
    certification: str | None = None          # certified | borderline | failed
    model: ExplicitModel | None = None
    report: CertificationReport | None = None
    formula_verdict: Verdict | None = None
    path: ReductionPath | None = None
    witness: dict | None = None
    records: list = field(default_factory=list)
    message: str = ""


def solve_path(path: ReductionPath, config: Config, tag: str = "query") -> SolveResult:
    """External solver when configured (with internal re-validation), else internal search."""
    if config.solver:
        res = solve_external(path.formula, SolverConfig(config.solver, config.timeout, config.output_dir), tag)
        if res.status == "sat" and not res.validated:
            seeded = search_internal(path.formula, config.budget, initial=res.witness)
            if seeded.status == "sat":
                seeded.diagnostics.update(res.diagnostics, reseeded=True)
                return seeded
            res.status = "unknown"
            res.diagnostics["error"] = "unvalidated model"
        return res
    return search_internal(path.formula, config.budget)


def _paths(conjuncts, config):
    for bi, c in enumerate(conjuncts):
        step1 = {}
        for path in reduction_paths(c, config.arrangement_cap, config.branch_cap):
            si = step1.setdefault(path.positive, len(step1))
            yield bi, si, path


def _complete_model(model: ExplicitModel, formula) -> ExplicitModel:
    numeric = dict(model.numeric)
    for v in variables(formula):
        numeric.setdefault(v, Fraction(0))
    fns = dict(model.functional)
    for f in function_vars(formula):
        if f not in fns and not f.startswith("@"):
            fns[f] = PiecewiseModel.constant(0)
    return ExplicitModel(numeric, fns)


def _finish(decision: Decision, path: ReductionPath, res: SolveResult, formula, config: Config):
    decision.status = "sat"
    decision.path = path
    decision.witness = res.witness
    try:
        model = build_model(path.context, res.witness, path.ordered, samples=config.samples)
    except ModelConstructionFailure as exc:
        decision.certification = "failed"
        decision.message = f"model construction failed: {exc}"
        return decision
    model = _complete_model(model, formula)
    decision.model = model
    report = certify(path.source, model, config.tolerance, config.samples)
    decision.report = report
    fv = evaluate(formula, model, config.tolerance)
    decision.formula_verdict = fv
    status = report.status
    if fv is Verdict.FALSE:
        status = "failed"
    elif fv is Verdict.BORDERLINE and status == "certified":
        status = "borderline"
    decision.certification = status
    return decision


def decide(formula, config: Config | None = None) -> Decision:
    """Decide satisfiability of a formula (AST or source text)."""
    config = config or Config()
    if isinstance(formula, str):
        formula = parse(formula)
    validate(formula)
    work = desugar_constants(formula)
    conjuncts = normalize(work, config.branch_cap)
    decision = Decision("unsat")
    if config.output_dir is not None:
        Path(config.output_dir).mkdir(parents=True, exist_ok=True)
    any_unknown = False

    def run(item):
        bi, si, path = item
        tag = f"b{bi}_s{si}_a{_arr_tag(path)}"
        t0 = time.perf_counter()
        res = solve_path(path, config, tag)
        rec = PathRecord(bi, si, str(path.arrangement), res.status, res.diagnostics.get("solver", "?"),
                         res.diagnostics.get("wall_time", time.perf_counter() - t0),
                         res.diagnostics.get("transcript"), res.validated)
        return path, res, rec

    items = _paths(conjuncts, config)
    if config.workers <= 1:
        for item in items:
            path, res, rec = run(item)
            decision.records.append(rec)
            if res.status == "sat":
                return _finish(decision, path, res, formula, config)
            any_unknown |= res.status != "unsat"
    else:
        with ThreadPoolExecutor(config.workers) as pool:
            futures = [pool.submit(run, it) for it in items]
            found = None
            for fut in as_completed(futures):
                if fut.cancelled():
                    continue
                path, res, rec = fut.result()
                decision.records.append(rec)
                if res.status == "sat" and found is None:
                    found = (path, res)
                    for other in futures:
                        other.cancel()
                any_unknown |= res.status not in ("unsat", "sat")
            if found:
                return _finish(decision, found[0], found[1], formula, config)
    decision.status = "unknown" if any_unknown else "unsat"
    if decision.status == "unknown" and not config.solver:
        decision.message = "no external solver configured; internal search cannot refute"
    return decision


def _arr_tag(path: ReductionPath) -> str:
    import hashlib
    return hashlib.sha1(str(path.arrangement).encode()).hexdigest()[:8]
