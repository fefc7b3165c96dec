"""Pydantic request models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class RatioRequest(BaseModel):
    x: list[list[float]]
    z: list[list[float]]
    m: int | None = None
    alpha: float | None = None


class RatioAtRequest(RatioRequest):
    points: list[list[float]]
    baseline: str = "matching"


class KlRequest(RatioRequest):
    pass


class AteRequest(BaseModel):
    x: list[list[float]]
    d: list[int]
    y: list[float]
    method: str = "bc"
    m: int | None = None
    alpha: float | None = None
    degree: int | None = None
    folds: int = 2
    seed: int = 0
    level: float = 0.95


class SimulateRequest(BaseModel):
    task: str
    spec: dict
    n_grid: list[int] | None = None
    reps: int = 100
    alpha: float = 1.0
    seed: int = 0
    eval_point: list[float] | None = None
    n: int | None = None
    method: str = "bc"
    degree: int | None = None
    folds: int = 2


class BenchRequest(BaseModel):
    n_grid: list[int] = Field(min_length=1)
    d: int = 2
    m: int | None = None
    alpha: float | None = None
    seed: int = 0
