"""FastAPI service exposing the estimation toolkit.

Responses reuse the same result builders as the CLI and are serialized with
the same fixed-precision JSON writer, so a client parsing either surface
recovers identical doubles.
"""

from __future__ import annotations

import json
import time

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import Response

from .. import __version__, runs
from ..data import CausalDataset, PointSet
from ..errors import MatchkitError
from ..io import dumps, sha256_text
from .models import (
    AteRequest,
    BenchRequest,
    KlRequest,
    RatioAtRequest,
    RatioRequest,
    SimulateRequest,
)


def _json_response(payload: dict, status_code: int = 200) -> Response:
    return Response(content=dumps(payload), status_code=status_code,
                    media_type="application/json")


def _digest(obj) -> str:
    return sha256_text(json.dumps(obj, sort_keys=True))


def _points(rows: list[list[float]]) -> PointSet:
    return PointSet(np.asarray(rows, dtype=np.float64))


def create_app() -> FastAPI:
    app = FastAPI(title="matchkit", version=__version__)

    @app.exception_handler(MatchkitError)
    async def matchkit_error_handler(_: Request, exc: MatchkitError):
        return _json_response(
            {"error": {"code": exc.code, "message": exc.message}},
            status_code=400,
        )

    @app.get("/v1/health")
    def health():
        return _json_response({"status": "ok", "version": __version__})

    @app.post("/v1/ratio")
    def ratio(req: RatioRequest):
        t0 = time.perf_counter()
        x, z = _points(req.x), _points(req.z)
        result = runs.run_ratio(x, z, m=req.m, alpha=req.alpha)
        config = {"m": req.m, "alpha": req.alpha}
        inputs = {"x": _digest(req.x), "z": _digest(req.z)}
        return _json_response(runs.finish("ratio", config, inputs, 0, result, t0))

    @app.post("/v1/ratio-at")
    def ratio_at(req: RatioAtRequest):
        t0 = time.perf_counter()
        x, z, pts = _points(req.x), _points(req.z), _points(req.points)
        result = runs.run_ratio_at(x, z, pts, baseline=req.baseline,
                                   m=req.m, alpha=req.alpha)
        config = {"baseline": req.baseline, "m": req.m, "alpha": req.alpha}
        inputs = {"x": _digest(req.x), "z": _digest(req.z),
                  "points": _digest(req.points)}
        return _json_response(runs.finish("ratio-at", config, inputs, 0, result, t0))

    @app.post("/v1/kl")
    def kl(req: KlRequest):
        t0 = time.perf_counter()
        x, z = _points(req.x), _points(req.z)
        result = runs.run_kl(x, z, m=req.m, alpha=req.alpha)
        config = {"m": req.m, "alpha": req.alpha}
        inputs = {"x": _digest(req.x), "z": _digest(req.z)}
        return _json_response(runs.finish("kl", config, inputs, 0, result, t0))

    @app.post("/v1/ate")
    def ate(req: AteRequest):
        t0 = time.perf_counter()
        ds = CausalDataset(
            covariates=_points(req.x),
            treatments=np.asarray(req.d, dtype=np.int64),
            outcomes=np.asarray(req.y, dtype=np.float64),
        )
        result = runs.run_ate(ds, method=req.method, m=req.m, alpha=req.alpha,
                              degree=req.degree, folds=req.folds,
                              seed=req.seed, level=req.level)
        config = {"method": req.method, "m": req.m, "alpha": req.alpha,
                  "degree": req.degree, "folds": req.folds, "level": req.level}
        inputs = {"data": _digest([req.x, req.d, req.y])}
        return _json_response(runs.finish("ate", config, inputs, req.seed,
                                          result, t0))

    @app.post("/v1/simulate")
    def simulate(req: SimulateRequest):
        t0 = time.perf_counter()
        result = runs.run_simulate(
            req.task, req.spec, n_grid=req.n_grid, reps=req.reps,
            alpha=req.alpha, seed=req.seed, eval_point=req.eval_point,
            n=req.n, method=req.method, degree=req.degree, folds=req.folds,
        )
        config = {"task": req.task, "spec": req.spec, "n_grid": req.n_grid,
                  "reps": req.reps, "alpha": req.alpha,
                  "eval_point": req.eval_point, "n": req.n,
                  "method": req.method, "degree": req.degree,
                  "folds": req.folds}
        inputs = {"spec": _digest(req.spec)}
        return _json_response(runs.finish("simulate", config, inputs,
                                          req.seed, result, t0))

    @app.post("/v1/bench")
    def bench(req: BenchRequest):
        t0 = time.perf_counter()
        result = runs.run_bench(req.n_grid, req.d, m=req.m, alpha=req.alpha,
                                seed=req.seed)
        config = {"n_grid": req.n_grid, "d": req.d, "m": req.m,
                  "alpha": req.alpha}
        return _json_response(runs.finish("bench", config, {}, req.seed,
                                          result, t0))

    return app


app = create_app()
