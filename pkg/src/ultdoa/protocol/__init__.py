"""NRPPa procedure between the LMF, the AMF and the gNBs."""
from .entities import (
    POSITIONING_RNTI,
    Amf,
    AmfRegistry,
    Gnb,
    InputData,
    LocationData,
    Lmf,
    Network,
    PeriodicEventInfo,
    ProcedureTimeout,
    ProcedureTrace,
    ProtocolError,
    RoutingError,
    TraceRecord,
    UnknownUeError,
    World,
    amf_route,
    gnb_handle,
    lmf_run_procedure,
    read_trace,
)
from .messages import (
    AMF,
    LMF,
    HopLabel,
    MeasurementFailure,
    MeasurementRequest,
    MeasurementResponse,
    MessageEnvelope,
    NonUeAssociated,
    NrppaPdu,
    Plmn,
    PositioningActivationRequest,
    PositioningActivationResponse,
    PositioningInformationRequest,
    PositioningInformationResponse,
    SrsConfigurationIe,
    TrpInformation,
    TrpInformationRequest,
    TrpInformationResponse,
    TrpMeasurement,
    UeAssociated,
    decode,
    encode,
    pairs_with,
)
