"""Secure API server for cstarpert with authentication and rate limiting."""

import logging
from typing import Optional

from fastapi import FastAPI, Request, status
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, field_validator
from slowapi import Limiter, _rate_limit_exceeded_handler
from slowapi.errors import RateLimitExceeded
from slowapi.util import get_remote_address

from cstarpert import Toolkit, __version__
from cstarpert.core.matrices import op_norm
from cstarpert.utils.config import Settings
from cstarpert.utils.exceptions import CStarPertError, TooFar, UnknownScenarioError
from cstarpert.utils.serialization import (
    cluster_report_to_json,
    distance_to_json,
    matrix_to_json,
    perturbation_report_to_json,
    subalgebra_from_json,
)

logger = logging.getLogger(__name__)

# Initialize FastAPI app
app = FastAPI(
    title="cstarpert API",
    description="REST API for index, distance and perturbation computations on finite inclusions",
    version=__version__,
)

# Initialize rate limiter
limiter = Limiter(key_func=get_remote_address)
app.state.limiter = limiter
app.add_exception_handler(RateLimitExceeded, _rate_limit_exceeded_handler)

# Configure CORS - restrict to allowed origins
ALLOWED_ORIGINS = list(Settings.from_env().allowed_origins)

app.add_middleware(
    CORSMiddleware,
    allow_origins=ALLOWED_ORIGINS if "*" not in ALLOWED_ORIGINS else ["*"],
    allow_credentials=True,
    allow_methods=["GET", "POST"],
    allow_headers=["Content-Type", "X-API-Key"],
)

# Lazy toolkit initialization (singleton pattern)
_toolkit_instance: Optional[Toolkit] = None


def get_toolkit() -> Toolkit:
    """Get or create the toolkit instance."""
    global _toolkit_instance
    if _toolkit_instance is None:
        _toolkit_instance = Toolkit(samples=Settings.from_env().audit_samples)
    return _toolkit_instance


def get_api_key() -> Optional[str]:
    """Get API key from the environment; None means authentication is off."""
    return Settings.from_env().api_key or None


def verify_api_key(request: Request) -> bool:
    """Verify API key from request header."""
    api_key = get_api_key()

    # If no API key is configured, allow access (for development)
    if not api_key:
        return True

    provided_key = request.headers.get("X-API-Key")
    if not provided_key:
        return False

    return provided_key == api_key


# Public endpoints (no authentication required)
PUBLIC_ENDPOINTS = ["/", "/health", "/docs", "/openapi.json", "/redoc"]


@app.middleware("http")
async def api_key_middleware(request: Request, call_next):
    """Middleware to verify API key for protected endpoints."""
    if request.url.path in PUBLIC_ENDPOINTS:
        return await call_next(request)

    if not verify_api_key(request):
        return JSONResponse(
            content={"detail": "Invalid or missing API key. Provide X-API-Key header."},
            status_code=status.HTTP_401_UNAUTHORIZED,
        )

    return await call_next(request)


@app.exception_handler(TooFar)
async def too_far_handler(request: Request, exc: TooFar):
    return JSONResponse(
        status_code=422,
        content={"detail": str(exc), "stage": exc.stage, "value": exc.value, "limit": exc.limit},
    )


@app.exception_handler(UnknownScenarioError)
async def unknown_scenario_handler(request: Request, exc: UnknownScenarioError):
    return JSONResponse(
        status_code=status.HTTP_404_NOT_FOUND,
        content={"detail": str(exc), "available": exc.available},
    )


@app.exception_handler(CStarPertError)
async def toolkit_error_handler(request: Request, exc: CStarPertError):
    logger.error("computation failed: %s", exc)
    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content={"detail": f"Computation error: {exc}", "type": type(exc).__name__},
    )


class ScenarioRequest(BaseModel):
    """Fields shared by requests that plant a unitary in a scenario."""

    scenario: str = Field(..., min_length=1, max_length=100)
    eps: float = Field(..., ge=0.0, lt=2.0)
    seed: int = Field(default=0, ge=0)

    @field_validator("scenario")
    @classmethod
    def validate_scenario(cls, v: str) -> str:
        """Validate the name is not just whitespace."""
        if not v.strip():
            raise ValueError("Scenario name cannot be empty or whitespace only")
        return v.strip()


class PerturbRequest(ScenarioRequest):
    include_timings: bool = False


class DistanceRequest(ScenarioRequest):
    pass


class ClusterRequest(ScenarioRequest):
    eps: float = Field(default=1e-6, ge=0.0, lt=2.0)
    attempt_below: float = Field(default=1.0, gt=0.0, le=2.0)


class InclusionRequest(BaseModel):
    """C <= D given as HS-orthonormal bases in the subalgebra JSON layout."""

    c: dict
    d: dict

    @field_validator("c", "d")
    @classmethod
    def validate_subalgebra(cls, v: dict) -> dict:
        """Reject bases that do not decode."""
        try:
            subalgebra_from_json(v)
        except (CStarPertError, KeyError, TypeError) as e:
            raise ValueError(f"invalid subalgebra: {e}") from e
        return v


class AuditRequest(BaseModel):
    trials: int = Field(default=10, ge=1, le=2000)
    seed: int = Field(default=0, ge=0)


@app.get("/")
async def root():
    """Root endpoint - public."""
    return {
        "name": "cstarpert API",
        "version": __version__,
        "status": "running",
        "authenticated": bool(get_api_key()),
    }


@app.get("/health")
async def health_check():
    """Health check endpoint - public."""
    return {
        "status": "healthy",
        "scenarios": len(get_toolkit().list_scenarios()),
        "authenticated": bool(get_api_key()),
    }


@app.get("/scenarios")
@limiter.limit("30/minute")
def list_scenarios(request: Request):
    """List catalog scenarios - requires API key."""
    return {"scenarios": get_toolkit().list_scenarios()}


@app.get("/scenarios/{name}/index")
@limiter.limit("30/minute")
def scenario_index(request: Request, name: str):
    """Watatani index of a scenario's expectation - requires API key."""
    toolkit = get_toolkit()
    scenario = toolkit.scenario(name)
    index = toolkit.index(name)
    return {
        "scenario": name,
        "index": matrix_to_json(index),
        "norm": op_norm(index),
        "expected": scenario.expected,
    }


@app.post("/index")
@limiter.limit("20/minute")
def inclusion_index(request: Request, body: InclusionRequest):
    """Watatani index of the trace-preserving expectation for a supplied C <= D - requires API key."""
    c = subalgebra_from_json(body.c)
    d = subalgebra_from_json(body.d)
    index = get_toolkit().inclusion_index(c, d)
    return {"index": matrix_to_json(index), "norm": op_norm(index), "dim_c": c.dim, "dim_d": d.dim}


@app.post("/perturb")
@limiter.limit("10/minute")
def perturb(request: Request, body: PerturbRequest):
    """Plant u0 A u0* and recover a conjugating unitary - requires API key."""
    result = get_toolkit().recover(body.scenario, body.eps, body.seed)
    return {
        "scenario": body.scenario,
        "eps": body.eps,
        "seed": body.seed,
        "planted": matrix_to_json(result.planted),
        "report": perturbation_report_to_json(result.report, include_timings=body.include_timings),
    }


@app.post("/distance")
@limiter.limit("20/minute")
def distance(request: Request, body: DistanceRequest):
    """Certified distance bracket between A and u0 A u0* - requires API key."""
    estimate = get_toolkit().distance(body.scenario, body.eps, body.seed)
    return {"scenario": body.scenario, "eps": body.eps, "seed": body.seed, "distance": distance_to_json(estimate)}


@app.post("/cluster")
@limiter.limit("5/minute")
def cluster(request: Request, body: ClusterRequest):
    """Cluster A, u0 A u0* and the scenario's alternatives - requires API key."""
    report = get_toolkit().cluster(body.scenario, body.eps, body.seed, body.attempt_below)
    return {"scenario": body.scenario, "cluster": cluster_report_to_json(report)}


@app.post("/audit")
@limiter.limit("5/minute")
def audit(request: Request, body: AuditRequest):
    """Randomized sweeps of the standalone estimates - requires API key."""
    results = get_toolkit().audit(body.trials, body.seed)
    return {
        "trials": body.trials,
        "seed": body.seed,
        "audits": [r.to_dict() for r in results],
        "passed": all(r.passed() for r in results),
    }


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
