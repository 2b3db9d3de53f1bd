from fastapi import FastAPI

from app.dependencies import configure_logging

configure_logging()

app = FastAPI(title="chemoflow", description="정규화 화학주성-Navier-Stokes 시뮬레이터 API")

# API 라우터 등록
from app.routers import simulations
app.include_router(simulations.router)


@app.get("/health")
async def health_check():
    return {"status": "healthy"}


if __name__ == "__main__":
    import uvicorn
    uvicorn.run("app.main:app", host="0.0.0.0", port=8000)
