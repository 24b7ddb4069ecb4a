from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """애플리케이션 설정"""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="BANACH_SA_",
        case_sensitive=False
    )

    # 출력 설정
    out_dir: str = Field(default="./runs", description="실행 결과 디렉토리")
    jobs: int = Field(default=1, ge=1, description="워커 프로세스 수")

    # 로깅 설정
    log_level: str = Field(default="INFO", description="로그 레벨")
    log_file: str | None = Field(default=None, description="로그 파일 경로")

    # 급수 판정 설정
    divergence_threshold: float = Field(default=1e3, description="발산 판정 부분합 임계값")
    cauchy_tolerance: float = Field(default=1e-6, description="코시 꼬리 허용오차")
    converge_exponent: float = Field(default=1.5, description="수렴 판정 블록 감쇠 지수 하한")
    diverge_exponent: float = Field(default=1.15, description="발산 판정 블록 감쇠 지수 상한")
    series_fit_blocks: int = Field(default=6, ge=3, description="감쇠 지수 적합에 쓰는 마지막 블록 수")

    # 인증서 설정
    r2_tolerance: float = Field(default=1e-9, description="근 조건 비율 허용오차")
    r2_samples: int = Field(default=10_000, ge=1, description="근 조건 표본 수")
    smoothness_pairs: int = Field(default=10_000, ge=1, description="평활성 검사 표본 쌍 수")
    certificate_horizon: int = Field(default=1 << 20, ge=128, description="급수 인증서 최대 항 수")

    # 엔진 설정
    overflow_limit: float = Field(default=1e150, description="발산 중단 노름 한계")
    start_index_limit: int = Field(default=1_000_000, description="beta_n < 1 시작 인덱스 탐색 한계")
    noise_block_size: int = Field(default=1024, ge=1, description="잡음 블록 크기")

    # 몬테카를로 설정
    bar_mc_draws: int = Field(default=100_000, ge=1, description="조건부 평균 추정 표본 수")

    @property
    def log_level_name(self) -> str:
        """로그 레벨 대문자 이름"""
        return self.log_level.strip().upper()


settings = Settings()
