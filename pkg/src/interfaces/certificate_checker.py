from abc import ABC, abstractmethod
from typing import TYPE_CHECKING

from src.core.models import CertificateReport, CertificateResult

if TYPE_CHECKING:
    from src.services.factory import Experiment


class CertificateCheckerInterface(ABC):
    """개별 인증서 검사기 인터페이스"""

    @abstractmethod
    async def check(self, experiment: "Experiment") -> list[CertificateResult]:
        """인증서 검사"""
        pass


class CompositeCheckerInterface(ABC):
    """체제별 종합 검사기 인터페이스"""

    @abstractmethod
    async def check_all(self, experiment: "Experiment") -> CertificateReport:
        """적용 가능한 모든 인증서 검사"""
        pass
