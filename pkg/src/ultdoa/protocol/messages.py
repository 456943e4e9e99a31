"""NRPPa PDUs, routing scopes and transport envelopes.

PDUs are plain frozen dataclasses.  ``encode``/``decode`` give a canonical,
self-describing JSON form (sorted keys, type tags) used for logging and for
golden-trace comparisons.
"""
import dataclasses
import enum
import json
from dataclasses import dataclass, field
from typing import Optional, Union

from ..channel import Position3D
from ..signal import SrsConfig

LMF = "LMF"
AMF = "AMF"
LCS_CLIENT = "LCS-Client"


# --------------------------------------------------------------------------
# information elements
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class Plmn:
    mcc: str
    mnc: str

    def __post_init__(self):
        if not (len(self.mcc) == 3 and self.mcc.isdigit()):
            raise ValueError(f"MCC must be 3 digits, got {self.mcc!r}")
        if not (len(self.mnc) in (2, 3) and self.mnc.isdigit()):
            raise ValueError(f"MNC must be 2 or 3 digits, got {self.mnc!r}")


@dataclass(frozen=True)
class TrpInformation:
    trp_id: int
    plmn: Plmn
    location: Position3D
    uncertainty_m: float = 0.0
    nr_cell_id: int = 0

    def __post_init__(self):
        if self.uncertainty_m < 0:
            raise ValueError("location uncertainty must be >= 0")


@dataclass(frozen=True)
class SrsConfigurationIe:
    config: SrsConfig
    srs_resource_set_id: int = 0
    sequence_root: int = 1
    serving_cell_id: str = ""


@dataclass(frozen=True)
class TrpMeasurement:
    trp_id: int
    ul_rtoa_index: int
    k: int
    rx_tx_diff_s: float
    rsrp_dbfs: float


@dataclass(frozen=True)
class MeasurementFailureCause:
    trp_id: int
    cause: str


# --------------------------------------------------------------------------
# routing scope
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class NonUeAssociated:
    pass


@dataclass(frozen=True)
class UeAssociated:
    supi: str


Scope = Union[NonUeAssociated, UeAssociated]


# --------------------------------------------------------------------------
# PDU bodies
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class TrpInformationRequest:
    pass


@dataclass(frozen=True)
class TrpInformationResponse:
    trps: tuple = ()


@dataclass(frozen=True)
class PositioningInformationRequest:
    requested_srs: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PositioningInformationResponse:
    srs: SrsConfigurationIe


@dataclass(frozen=True)
class PositioningActivationRequest:
    srs_resource_set_id: int = 0
    srs_resource_trigger: int = 1


@dataclass(frozen=True)
class PositioningActivationResponse:
    sfn: int
    slot: int
    criticality_diagnostics: Optional[str] = None

    def __post_init__(self):
        if not 0 <= self.sfn <= 1023:
            raise ValueError(f"SFN must lie in [0, 1023], got {self.sfn}")


@dataclass(frozen=True)
class MeasurementRequest:
    trp_ids: tuple
    srs: SrsConfigurationIe
    measurement_rnti: int


@dataclass(frozen=True)
class MeasurementResponse:
    measurements: tuple = ()
    failures: tuple = ()


@dataclass(frozen=True)
class MeasurementFailure:
    failures: tuple = ()


REQUEST_TYPES = (
    TrpInformationRequest,
    PositioningInformationRequest,
    PositioningActivationRequest,
    MeasurementRequest,
)

RESPONSE_FOR = {
    TrpInformationRequest: (TrpInformationResponse,),
    PositioningInformationRequest: (PositioningInformationResponse,),
    PositioningActivationRequest: (PositioningActivationResponse,),
    MeasurementRequest: (MeasurementResponse, MeasurementFailure),
}

MESSAGE_TYPE = {
    TrpInformationRequest: "TRPInformationRequest",
    TrpInformationResponse: "TRPInformationResponse",
    PositioningInformationRequest: "PositioningInformationRequest",
    PositioningInformationResponse: "PositioningInformationResponse",
    PositioningActivationRequest: "PositioningActivationRequest",
    PositioningActivationResponse: "PositioningActivationResponse",
    MeasurementRequest: "MeasurementRequest",
    MeasurementResponse: "MeasurementResponse",
    MeasurementFailure: "MeasurementFailure",
}


@dataclass(frozen=True)
class NrppaPdu:
    transaction_id: int
    scope: Scope
    body: object

    def __post_init__(self):
        if self.transaction_id < 0:
            raise ValueError("transaction id must be >= 0")
        if type(self.body) not in MESSAGE_TYPE:
            raise TypeError(f"unknown NRPPa body {type(self.body).__name__}")

    @property
    def message_type(self):
        return MESSAGE_TYPE[type(self.body)]

    @property
    def is_request(self):
        return isinstance(self.body, REQUEST_TYPES)

    @property
    def ue_associated(self):
        return isinstance(self.scope, UeAssociated)


def pairs_with(request, response):
    """True when ``response`` is a legal answer to ``request``."""
    return (
        response.transaction_id == request.transaction_id
        and response.scope == request.scope
        and isinstance(response.body, RESPONSE_FOR.get(type(request.body), ()))
    )


# --------------------------------------------------------------------------
# envelopes
# --------------------------------------------------------------------------
class HopLabel(str, enum.Enum):
    NAMF_NON_UE_N2_TRANSFER = "Namf_NonUE_N2_Transfer"
    NAMF_N1N2_TRANSFER = "Namf_N1N2_Transfer"
    NAMF_NON_UE_N2_NOTIFY = "Namf_NonUE_N2_Notify"
    NAMF_N2_NOTIFY = "Namf_N2_Notify"
    NGAP_DL_NON_UE = "NGAP_DL_NonUE"
    NGAP_UL_NON_UE = "NGAP_UL_NonUE"
    NGAP_DL_UE = "NGAP_DL_UE"
    NGAP_UL_UE = "NGAP_UL_UE"


# (source kind, destination kind, ue_associated) -> label
_LEGAL_HOPS = {
    ("lmf", "amf", False): HopLabel.NAMF_NON_UE_N2_TRANSFER,
    ("lmf", "amf", True): HopLabel.NAMF_N1N2_TRANSFER,
    ("amf", "gnb", False): HopLabel.NGAP_DL_NON_UE,
    ("amf", "gnb", True): HopLabel.NGAP_DL_UE,
    ("gnb", "amf", False): HopLabel.NGAP_UL_NON_UE,
    ("gnb", "amf", True): HopLabel.NGAP_UL_UE,
    ("amf", "lmf", False): HopLabel.NAMF_NON_UE_N2_NOTIFY,
    ("amf", "lmf", True): HopLabel.NAMF_N2_NOTIFY,
}


def entity_kind(entity_id):
    if entity_id == LMF:
        return "lmf"
    if entity_id == AMF:
        return "amf"
    return "gnb"


def hop_label_for(src, dst, pdu):
    key = (entity_kind(src), entity_kind(dst), pdu.ue_associated)
    if key not in _LEGAL_HOPS:
        raise ValueError(f"no NRPPa transport hop from {src} to {dst}")
    return _LEGAL_HOPS[key]


@dataclass(frozen=True)
class MessageEnvelope:
    src: str
    dst: str
    hop_label: HopLabel
    pdu: NrppaPdu

    def __post_init__(self):
        expected = hop_label_for(self.src, self.dst, self.pdu)
        if HopLabel(self.hop_label) is not expected:
            raise ValueError(
                f"hop label {self.hop_label} illegal for {self.src}->{self.dst} "
                f"({'UE' if self.pdu.ue_associated else 'non-UE'} associated); expected {expected.value}"
            )
        object.__setattr__(self, "hop_label", expected)

    @classmethod
    def make(cls, src, dst, pdu):
        return cls(src, dst, hop_label_for(src, dst, pdu), pdu)


# --------------------------------------------------------------------------
# canonical serialisation
# --------------------------------------------------------------------------
_REGISTRY = {
    cls.__name__: cls
    for cls in (
        Plmn,
        TrpInformation,
        SrsConfigurationIe,
        TrpMeasurement,
        MeasurementFailureCause,
        NonUeAssociated,
        UeAssociated,
        NrppaPdu,
        Position3D,
        SrsConfig,
        *MESSAGE_TYPE,
    )
}


def _to_plain(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {"_type": type(obj).__name__}
        for f in dataclasses.fields(obj):
            out[f.name] = _to_plain(getattr(obj, f.name))
        return out
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _to_plain(v) for k, v in obj.items()}
    if hasattr(obj, "item"):  # numpy scalar
        return obj.item()
    return obj


def _from_plain(obj):
    if isinstance(obj, dict):
        if "_type" in obj:
            cls = _REGISTRY[obj["_type"]]
            kwargs = {k: _from_plain(v) for k, v in obj.items() if k != "_type"}
            return cls(**kwargs)
        return {k: _from_plain(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return tuple(_from_plain(v) for v in obj)
    return obj


def encode(obj):
    return json.dumps(_to_plain(obj), sort_keys=True, separators=(",", ":"))


def decode(text):
    return _from_plain(json.loads(text))
