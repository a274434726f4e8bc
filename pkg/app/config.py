from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # ─── Application ───────────────────────────────────────────────────────────
    APP_NAME:  str = "Non-Coherent MAC Constellation Designer"
    APP_ENV:   str = "development"
    APP_HOST:  str = "0.0.0.0"
    APP_PORT:  int = 3000
    LOG_LEVEL: str = "INFO"

    # ─── Run Registry ──────────────────────────────────────────────────────────
    DATABASE_URL:  str  = "sqlite:///./runs.db"
    DATABASE_ECHO: bool = False
    RECORD_RUNS:   bool = True

    # ─── Constellation ─────────────────────────────────────────────────────────
    GRASSMANN_BUILD_TOL:  float = 1e-10
    GRASSMANN_CHECK_TOL:  float = 1e-8
    IDENTIFIABILITY_TOL:  float = 1e-9
    PARTITION_MAX_SWAPS:  int   = 1000

    # ─── Optimizer ─────────────────────────────────────────────────────────────
    DEFAULT_EPSILON:       float = 0.01
    DEFAULT_ANNEAL:        bool  = True
    DEFAULT_DESIGN_SNR_DB: float = 30.0
    DEFAULT_MAX_ITERS:     int   = 500
    DEFAULT_STEP_INIT:     float = 1e-2
    DEFAULT_ARMIJO_C:      float = 1e-4
    DEFAULT_ARMIJO_SHRINK: float = 0.5
    DEFAULT_GRAD_TOL:      float = 1e-6
    MAX_BACKTRACKS:        int   = 25

    # ─── Simulator ─────────────────────────────────────────────────────────────
    SIM_WORKERS:        int   = 1
    SIM_CHUNK_BLOCKS:   int   = 1024
    MAX_QAM_ORDER:      int   = 1024
    PILOT_ML_MAX_JOINT: int   = 2**20
    PILOT_POWER_RATIO:  float = 1.0

    @property
    def is_development(self) -> bool:
        return self.APP_ENV == "development"

    model_config = {"env_file": ".env", "case_sensitive": True, "extra": "ignore"}


settings = Settings()
