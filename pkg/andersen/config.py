from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv
from pathlib import Path

# Load .env file explicitly - resolve path relative to project root
project_root = Path(__file__).parent.parent
env_file = project_root / ".env"
load_dotenv(dotenv_path=env_file)


class Settings(BaseSettings):
    """Process-wide knobs, read from ANDERSEN_* environment variables"""

    model_config = SettingsConfigDict(
        env_prefix="ANDERSEN_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Caps the number of worker processes used for replica chunks
    THREADS: int = 1
    # Replicas per batched chunk; fixed so results do not depend on THREADS
    CHUNK_SIZE: int = 512
    LOG_LEVEL: str = "INFO"
    PROGRESS: bool = False
    OUTPUT_DIR: Path = Path("results")


settings = Settings()
