"""Request/response models for the HTTP service.

Specs and worksheets travel as their canonical text formats inside JSON
strings; exact rationals are serialized as strings ("17", "3/2") so nothing
ever rounds.
"""

from __future__ import annotations

from typing import List, Optional

from pydantic import BaseModel, Field


class SpecRequest(BaseModel):
    spec: str = Field(description="operation spec in the text format")
    mode: str = Field(default="indexed", pattern="^(indexed|flame)$")


class CandidateModel(BaseModel):
    id: int
    valid: bool
    direction: str
    label: str
    predicate: str
    reason: str = ""
    notes: List[str] = []


class InvariantsResponse(BaseModel):
    op: str
    mode: str
    candidates: List[CandidateModel]


class DeriveRequest(BaseModel):
    spec: str
    invariant_id: int
    mode: str = Field(default="indexed", pattern="^(indexed|flame)$")
    seed: Optional[int] = None
    trials: Optional[int] = None


class ObligationModel(BaseModel):
    name: str
    description: str
    verdict: str
    tier: str
    reason: str = ""
    counterexample: Optional[str] = None


class WorksheetResponse(BaseModel):
    worksheet: str
    complete: bool
    notes: List[str] = []
    obligations: List[ObligationModel] = []


class VerifyRequest(BaseModel):
    worksheet: str
    seed: Optional[int] = None
    trials: Optional[int] = None


class VerifyResponse(BaseModel):
    op: str
    invariant_id: int
    mode: str
    ok: bool
    obligations: List[ObligationModel]


class RunRequest(BaseModel):
    worksheet: str
    coeffs: List[str] = Field(description="exact rationals, lowest degree first")
    x: str
    check_invariants: bool = False
    trace: bool = False


class RunResponse(BaseModel):
    output: str
    result: str
    iterations: int
    trace: Optional[List[dict]] = None


class CostRequest(BaseModel):
    worksheet: str
    max_n: int = 64
    seed: Optional[int] = None
    trials: Optional[int] = None


class CostResponse(BaseModel):
    increment: Optional[int]
    recurrence: str
    closed_form: Optional[str]
    cost_invariant: Optional[str]
    total_cost: Optional[str]
    obligations: List[ObligationModel]
    runtime_counts: List[List[int]]
    runtime_ok: bool


class RenderRequest(BaseModel):
    worksheet: str
    format: str = Field(default="text", pattern="^(text|latex|markdown)$")


class RenderResponse(BaseModel):
    rendered: str


class DeriveAllRequest(BaseModel):
    spec: str
    mode: str = Field(default="both", pattern="^(indexed|flame|both)$")
    seed: Optional[int] = None
    trials: Optional[int] = None
    oracle_checks: int = 200


class DerivedRow(BaseModel):
    mode: str
    invariant_id: int
    guard: str
    update: str
    cost_closed_form: Optional[str]
    oracle_mismatches: int


class DeriveAllResponse(BaseModel):
    op: str
    rows: List[DerivedRow]
    oracle_checks: int
    ok: bool


class ErrorDetail(BaseModel):
    kind: str
    message: str
