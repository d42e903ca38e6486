"""HTTP service exposing the verification pipeline.

Endpoints wrap the core package one-to-one: ``/analyze`` computes the
unstable rectangles, ``/synthesize`` runs the full condition synthesis,
``/evaluate`` scores datasets, ``/rank`` orders formulas by greedy training
coverage, and ``/predict`` runs plain majority-vote prediction. Payloads
carry the same portable JSON documents the CLI reads and writes, so clients
can compose runs from files.
"""

from __future__ import annotations

import math
import time
from typing import Any, Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .errors import InputError, ModelFormatError, ResourceLimitError
from .evaluation import (
    InstanceSet,
    accuracy,
    formulas_cover,
    gen_random_instances,
    oracle_flags,
    score_d,
    score_dtilde,
    top_k_greedy,
)
from .itemsets import Itemset
from .model import Ensemble, parse_model, predict_batch
from .stability import DEFAULT_MAX_CLASSES, UnstableSet, analyze
from .synthesis import (
    DEFAULT_MAX_CANDIDATES,
    FormulaSet,
    render_formulas,
    synthesize_from_unstable,
)


class ItemDoc(BaseModel):
    feature: int
    op: Literal["le", "gt"]
    threshold: float


class ItemsetDoc(BaseModel):
    items: list[ItemDoc]


class IntervalDoc(BaseModel):
    lo: float | Literal["-inf"]
    hi: float | Literal["+inf"]


class RectangleDoc(BaseModel):
    id: int | None = None
    intervals: dict[str, IntervalDoc]


class DatasetDoc(BaseModel):
    """A dataset reference: either inline CSV text (the on-disk format) or a
    request for a seeded uniform random set."""

    name: str = "dataset"
    csv_text: str | None = None
    random_n: int | None = None
    seed: int = 0


class AnalyzeRequest(BaseModel):
    model: dict[str, Any]
    sensitive: list[str | int]
    max_classes: int = DEFAULT_MAX_CLASSES
    prune_contained: bool = False


class AnalyzeResponse(BaseModel):
    rectangles: list[RectangleDoc]
    elapsed_ms: int


class SynthesizeRequest(BaseModel):
    model: dict[str, Any]
    sensitive: list[str | int]
    max_iters: int | Literal["inf"] = 6
    max_classes: int = DEFAULT_MAX_CLASSES
    max_candidates: int = DEFAULT_MAX_CANDIDATES
    threads: int = 1
    use_ids_cache: bool = True


class SynthesizeResponse(BaseModel):
    converged: bool
    iterations: int
    formulas: list[ItemsetDoc]
    rendered: list[str]
    per_iteration_counts: list[int]
    warning: str | None = None
    elapsed_ms: int


class EvaluateRequest(BaseModel):
    model: dict[str, Any]
    sensitive: list[str | int] | None = None
    rectangles: list[RectangleDoc] | None = None
    formulas: dict[str, Any] | None = Field(
        default=None, description="a /synthesize response document"
    )
    datasets: list[DatasetDoc]
    curve: bool = True
    max_classes: int = DEFAULT_MAX_CLASSES


class DatasetReport(BaseModel):
    name: str
    n: int
    accuracy: float | None = None
    d: float | None = None
    d_tilde: float | None = None
    coverage_curve: list[tuple[int, float]] | None = None


class EvaluateResponse(BaseModel):
    reports: list[DatasetReport]
    elapsed_ms: int


class RankRequest(BaseModel):
    model: dict[str, Any]
    formulas: dict[str, Any]
    dataset: DatasetDoc
    k: int


class RankedFormulaDoc(BaseModel):
    formula: ItemsetDoc
    rendered: str
    covered: int


class RankResponse(BaseModel):
    ranked: list[RankedFormulaDoc]
    elapsed_ms: int


class PredictRequest(BaseModel):
    model: dict[str, Any]
    instances: list[list[float]]


class PredictResponse(BaseModel):
    labels: list[int]
    label_names: list[str]


def _fail(exc: Exception) -> HTTPException:
    if isinstance(exc, ResourceLimitError):
        return HTTPException(
            status_code=507, detail={"kind": "resource-limit", "message": str(exc)}
        )
    return HTTPException(status_code=422, detail={"kind": "input", "message": str(exc)})


def _parse(model_doc: dict[str, Any]) -> Ensemble:
    return parse_model(model_doc)


def _sensitive_ids(ensemble: Ensemble, sensitive: list[str | int]) -> frozenset[int]:
    return ensemble.metadata.resolve(sensitive)


def _rectangles_doc(U: UnstableSet) -> list[RectangleDoc]:
    return [RectangleDoc.model_validate(r) for r in U.to_json()]


def _unstable_from_doc(docs: list[RectangleDoc], num_features: int) -> UnstableSet:
    return UnstableSet.from_json([d.model_dump() for d in docs], num_features)


def _formula_set_from_doc(doc: dict[str, Any]) -> FormulaSet:
    """Rebuild a FormulaSet from a /synthesize response document.

    Members are serialized in discovery order, so per-iteration counts map
    them back to the iteration that produced them.
    """
    try:
        itemsets = [Itemset.from_json(d) for d in doc["formulas"]]
        counts = list(doc.get("per_iteration_counts", []))
        converged = bool(doc.get("converged", False))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid formulas document: {exc}") from exc
    iterations: list[int] = []
    for i, count in enumerate(counts, start=1):
        iterations.extend([i] * count)
    if len(iterations) != len(itemsets):
        if not counts and len(itemsets) == 1 and not itemsets[0].items:
            iterations = [0]  # the trivially-true condition of an empty U
        else:
            raise InputError("per_iteration_counts do not match the formula count")
    per_iteration = list(enumerate(counts, start=1))
    return FormulaSet(itemsets, iterations, per_iteration, converged)


def _materialize_dataset(doc: DatasetDoc, ensemble: Ensemble) -> InstanceSet:
    if (doc.csv_text is None) == (doc.random_n is None):
        raise InputError(
            f"dataset {doc.name!r} must provide exactly one of csv_text or random_n"
        )
    if doc.csv_text is not None:
        return InstanceSet.from_csv_text(doc.csv_text, ensemble.metadata, doc.name)
    ds = gen_random_instances(ensemble.metadata, doc.random_n, doc.seed)
    ds.provenance = doc.name
    return ds


def create_app() -> FastAPI:
    app = FastAPI(
        title="treefair",
        version=__version__,
        description="Global fairness verification for decision-tree ensembles",
    )

    @app.get("/health")
    def health() -> dict[str, str]:
        return {"status": "ok", "version": __version__}

    @app.post("/analyze", response_model=AnalyzeResponse)
    def analyze_endpoint(req: AnalyzeRequest) -> AnalyzeResponse:
        t0 = time.perf_counter()
        try:
            ensemble = _parse(req.model)
            U = analyze(
                ensemble,
                _sensitive_ids(ensemble, req.sensitive),
                max_classes=req.max_classes,
                prune_contained=req.prune_contained,
            )
        except (ModelFormatError, InputError, ResourceLimitError) as exc:
            raise _fail(exc) from exc
        return AnalyzeResponse(
            rectangles=_rectangles_doc(U),
            elapsed_ms=int((time.perf_counter() - t0) * 1000),
        )

    @app.post("/synthesize", response_model=SynthesizeResponse)
    def synthesize_endpoint(req: SynthesizeRequest) -> SynthesizeResponse:
        t0 = time.perf_counter()
        max_iters = math.inf if req.max_iters == "inf" else req.max_iters
        try:
            ensemble = _parse(req.model)
            U = analyze(
                ensemble,
                _sensitive_ids(ensemble, req.sensitive),
                max_classes=req.max_classes,
            )
            fs = synthesize_from_unstable(
                U,
                ensemble.metadata,
                max_iters,
                max_candidates=req.max_candidates,
                threads=req.threads,
                use_ids_cache=req.use_ids_cache,
            )
        except (ModelFormatError, InputError, ResourceLimitError) as exc:
            raise _fail(exc) from exc
        rendered = render_formulas(fs.itemsets, ensemble.metadata)
        return SynthesizeResponse(
            converged=fs.converged,
            iterations=fs.iterations,
            formulas=[ItemsetDoc.model_validate(s.to_json()) for s in fs.itemsets],
            rendered=[rf.text for rf in rendered],
            per_iteration_counts=fs.per_iteration_counts,
            warning=fs.warning,
            elapsed_ms=int((time.perf_counter() - t0) * 1000),
        )

    @app.post("/evaluate", response_model=EvaluateResponse)
    def evaluate_endpoint(req: EvaluateRequest) -> EvaluateResponse:
        t0 = time.perf_counter()
        try:
            ensemble = _parse(req.model)
            sensitive = (
                _sensitive_ids(ensemble, req.sensitive) if req.sensitive else None
            )
            if req.rectangles is not None:
                U = _unstable_from_doc(req.rectangles, ensemble.num_features)
            elif sensitive:
                U = analyze(ensemble, sensitive, max_classes=req.max_classes)
            else:
                U = None
            fs = _formula_set_from_doc(req.formulas) if req.formulas else None
            reports = []
            for doc in req.datasets:
                D = _materialize_dataset(doc, ensemble)
                report = DatasetReport(name=doc.name, n=len(D))
                if D.labels is not None:
                    report.accuracy = accuracy(ensemble, D)
                if U is not None:
                    report.d = score_d(U, D)
                if fs is not None:
                    report.d_tilde = score_dtilde(fs, D)
                    if req.curve and sensitive and fs.iterations > 0:
                        report.coverage_curve = _curve(ensemble, sensitive, fs, D)
                reports.append(report)
        except (ModelFormatError, InputError, ResourceLimitError) as exc:
            raise _fail(exc) from exc
        return EvaluateResponse(
            reports=reports, elapsed_ms=int((time.perf_counter() - t0) * 1000)
        )

    @app.post("/rank", response_model=RankResponse)
    def rank_endpoint(req: RankRequest) -> RankResponse:
        t0 = time.perf_counter()
        try:
            if req.k < 1:
                raise InputError("k must be positive")
            ensemble = _parse(req.model)
            fs = _formula_set_from_doc(req.formulas)
            D = _materialize_dataset(req.dataset, ensemble)
            ranked = top_k_greedy(fs, D, req.k)
        except (ModelFormatError, InputError, ResourceLimitError) as exc:
            raise _fail(exc) from exc
        docs = []
        for rf in ranked:
            [rendered] = render_formulas([rf.itemset], ensemble.metadata)
            docs.append(
                RankedFormulaDoc(
                    formula=ItemsetDoc.model_validate(rf.itemset.to_json()),
                    rendered=rendered.text,
                    covered=rf.covered,
                )
            )
        return RankResponse(
            ranked=docs, elapsed_ms=int((time.perf_counter() - t0) * 1000)
        )

    @app.post("/predict", response_model=PredictResponse)
    def predict_endpoint(req: PredictRequest) -> PredictResponse:
        try:
            ensemble = _parse(req.model)
            import numpy as np

            X = np.asarray(req.instances, dtype=float)
            if X.ndim != 2 or X.shape[1] != ensemble.num_features:
                raise InputError(
                    f"instances must be rows of {ensemble.num_features} values"
                )
            labels = predict_batch(ensemble, X)
        except (ModelFormatError, InputError) as exc:
            raise _fail(exc) from exc
        return PredictResponse(
            labels=[int(l) for l in labels],
            label_names=[ensemble.labels[int(l)] for l in labels],
        )

    return app


def _curve(
    ensemble: Ensemble,
    sensitive: frozenset[int],
    fs: FormulaSet,
    D: InstanceSet,
) -> list[tuple[int, float]]:
    fair_mask = ~oracle_flags(ensemble, sensitive, D.X)
    total = int(fair_mask.sum())
    curve = []
    for k in range(0, fs.iterations + 1):
        if total == 0:
            curve.append((k, 1.0))
            continue
        covered = int(formulas_cover(fs.up_to(k), D.X[fair_mask]).sum())
        curve.append((k, covered / total))
    return curve


app = create_app()
