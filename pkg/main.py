import uvicorn
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from src.conf.config import config
from src.routes import bounds, spectra

app = FastAPI(title="IGA collocation spectra")

origins = ["*"]
app.add_middleware(CORSMiddleware,
                   allow_origins=origins,
                   allow_credentials=True,
                   allow_methods=["*"],
                   allow_headers=["*"], )

app.include_router(bounds.router, prefix="/api")
app.include_router(spectra.router, prefix="/api")


@app.get("/api/healthchecker")
async def healthchecker():
    """
    Root GET route to check that the numerical stack is importable and responding.
    :return: Welcome message with the eigensolve cap
    """
    return {"message": "Welcome to IGA collocation spectra!", "eig_max_dof": config.EIG_MAX_DOF}


if __name__ == "__main__":
    uvicorn.run("main:app", host=config.API_HOST, port=config.API_PORT, log_level="info")
