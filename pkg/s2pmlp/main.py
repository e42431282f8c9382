import time
from functools import partial
from typing import List

from fastapi import Depends, FastAPI, Header, HTTPException, Request
from fastapi.responses import JSONResponse

from s2pmlp import __version__, complexity, config
from s2pmlp.bench import BENCHES, run_bench
from s2pmlp.errors import DimensionError, ExpRangeError, S2PError, UsageError
from s2pmlp.logging import NodeRequestMiddleware, get_logger, init_logging
from s2pmlp.metrics import instrumentator
from s2pmlp.schemas import BenchReport, BenchRequest, HealthResponse, ProtocolInfo, SweepRequest
from s2pmlp.utils import execute_parallel

logger = get_logger("api")

# Initialize structured logging
init_logging()

app = FastAPI(title="S2PMLP Client Node", version=__version__)

# Set up Prometheus metrics
instrumentator.instrument(app).expose(app, include_in_schema=True, should_gzip=True)

app.add_middleware(NodeRequestMiddleware)


@app.exception_handler(S2PError)
async def s2p_error_handler(request: Request, exc: S2PError):
    status = 422 if isinstance(exc, (UsageError, DimensionError, ExpRangeError)) else 500
    logger.warning("request_failed", path=request.url.path, error=str(exc), error_type=type(exc).__name__)
    return JSONResponse(status_code=status, content={"detail": str(exc), "error": type(exc).__name__})


# Dependency for API key validation
def require_api_key(x_api_key: str = Header(None)):
    if x_api_key != config.API_KEY:
        raise HTTPException(status_code=401, detail="Invalid API key")
    return True


@app.get("/health", response_model=HealthResponse)
async def health():
    start_time = time.perf_counter()
    health_data = {"status": "ok", "components": {}, "latency_ms": 0}

    # Smallest full protocol round trip through a fresh session
    try:
        run_bench("s2prip", 2, verify_rounds=1)
        health_data["components"]["session"] = {"status": "ok", "detail": None}
    except S2PError as exc:
        health_data["status"] = "error"
        health_data["components"]["session"] = {"status": "error", "detail": str(exc)}

    health_data["latency_ms"] = round((time.perf_counter() - start_time) * 1000, 2)
    if health_data["status"] == "error":
        return JSONResponse(status_code=500, content=health_data)
    return health_data


@app.get("/protocols", response_model=List[ProtocolInfo])
async def protocols():
    return [
        ProtocolInfo(
            name=name,
            rounds=complexity.PROTOCOL_ROUNDS[name],
            primitives=complexity.PRIMITIVES[name],
            miss_probability=complexity.miss_probability(name, config.DEFAULT_VERIFY_ROUNDS),
        )
        for name in BENCHES
    ]


# Sync handler: FastAPI runs it in the threadpool so sessions can block
@app.post("/bench", response_model=BenchReport, dependencies=[Depends(require_api_key)])
def bench(req: BenchRequest):
    return run_bench(
        req.protocol,
        req.dim,
        rho=req.rho,
        verify_rounds=req.verify_rounds,
        seed=req.seed,
        delta=req.delta,
    )


@app.post("/sweep", response_model=List[BenchReport], dependencies=[Depends(require_api_key)])
async def sweep(req: SweepRequest):
    if req.protocol not in BENCHES:
        raise UsageError(f"unknown protocol {req.protocol!r}")
    runner = partial(run_bench, req.protocol, req.dim, seed=req.seed)
    reports = await execute_parallel(
        lambda delta: runner(delta=delta),
        list(req.deltas),
        max_concurrency=config.MAX_WORKERS,
    )
    logger.info("sweep_complete", protocol=req.protocol, dim=req.dim, runs=len(reports))
    return reports
