from typing import Literal, Optional

from pydantic_settings import BaseSettings, SettingsConfigDict

DEFAULT_SEED = 1337


class Settings(BaseSettings):
    debug: bool = False
    seed: int = DEFAULT_SEED
    out_dir: str = "runs/latest"
    store_filename: str = "replies.db"

    earth_radius_km: float = 6371.0

    indoor_threshold: float = 0.8
    indoor_aggregation: Literal["mean", "min", "max"] = "mean"
    embedding_source: Literal["image", "caption"] = "image"
    filter_concurrency: int = 4

    failure_policy: Literal["score-zero", "exclude-and-report"] = "score-zero"
    penalty_distance_km: float = 2500.0

    default_in_flight: int = 4
    endpoints_path: Optional[str] = None

    model_config = SettingsConfigDict(
        env_prefix="GEOBENCH_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )
