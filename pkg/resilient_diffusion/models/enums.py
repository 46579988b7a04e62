"""Enumerations shared by the document models and the simulation core."""

from __future__ import annotations

from enum import StrEnum


class Kernel(StrEnum):
    """Adaptation kernel: plain mean-square error or Geman-McClure weighted."""

    LMS = "lms"
    LMG = "lmg"


class AlgorithmKind(StrEnum):
    """The six diffusion algorithms.

    ``NC_*`` kinds never read neighbour data; ``R*`` kinds apply the
    cost-contribution removal before combining.
    """

    NC_LMS = "nc_lms"
    DLMS = "dlms"
    NC_LMG = "nc_lmg"
    DLMG = "dlmg"
    RDLMS = "rdlms"
    RDLMG = "rdlmg"

    @property
    def kernel(self) -> Kernel:
        """Adaptation kernel used by this algorithm."""
        if self in (AlgorithmKind.NC_LMS, AlgorithmKind.DLMS, AlgorithmKind.RDLMS):
            return Kernel.LMS
        return Kernel.LMG

    @property
    def cooperative(self) -> bool:
        """Whether nodes combine neighbour estimates."""
        return self not in (AlgorithmKind.NC_LMS, AlgorithmKind.NC_LMG)

    @property
    def resilient(self) -> bool:
        """Whether the combination step discards extreme cost contributions."""
        return self in (AlgorithmKind.RDLMS, AlgorithmKind.RDLMG)

    @property
    def label(self) -> str:
        """Display label, e.g. ``RDLMG`` or ``NC-LMS``."""
        return self.value.upper().replace("_", "-")


class RegressorStyle(StrEnum):
    """How regression vectors are drawn."""

    IID = "iid"
    TAPPED_DELAY = "tapped_delay"
    DIRECTION_JITTER = "direction_jitter"


class BlockMode(StrEnum):
    """Update rule when a node observes several pairs per iteration."""

    AVERAGE = "average"
    SEQUENTIAL = "sequential"


class ChannelProfile(StrEnum):
    """Per-node channel gain profile for spectrum sensing."""

    FLAT = "flat"
    LOGNORMAL = "lognormal"
