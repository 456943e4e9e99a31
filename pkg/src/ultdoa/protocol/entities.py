"""LMF, AMF and gNB entities driven by a small discrete-event network.

Every entity is a sequential event processor: the network pops envelopes in
(delivery time, send order) and hands each to its destination's ``receive``.
The LMF drives the procedure synchronously, waiting on a count-or-timeout
barrier per transaction.
"""
import dataclasses
import heapq
import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import estimator
from ..channel import Position3D
from ..estimator import EstimationError, dequantize_ul_rtoa, encode_srs_indication
from ..locator import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL_M,
    InsufficientMeasurementsError,
    PositionEstimate,
    ls_position,
    nlls_refine,
    select_reference,
    toa_to_tdoa,
)
from .messages import (
    AMF,
    LCS_CLIENT,
    LMF,
    MeasurementFailure,
    MeasurementFailureCause,
    MeasurementRequest,
    MeasurementResponse,
    MessageEnvelope,
    NonUeAssociated,
    NrppaPdu,
    PositioningActivationRequest,
    PositioningActivationResponse,
    PositioningInformationRequest,
    PositioningInformationResponse,
    TrpInformationRequest,
    TrpInformationResponse,
    TrpMeasurement,
    UeAssociated,
)

log = logging.getLogger(__name__)

# NR reserves 0xFFF0-0xFFFD; the first one tags positioning-only SRS
POSITIONING_RNTI = 0xFFF0
DETERMINE_LOCATION_HOP = "Nlmf_DetermineLocation"


class ProtocolError(RuntimeError):
    pass


class RoutingError(ProtocolError):
    pass


class UnknownUeError(RoutingError):
    pass


class ProcedureTimeout(ProtocolError):
    pass


# --------------------------------------------------------------------------
# API-level data
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class PeriodicEventInfo:
    amount: int
    interval_s: float


@dataclass(frozen=True)
class InputData:
    supi: str
    ncgi: Optional[str] = None
    periodic_event_info: Optional[PeriodicEventInfo] = None

    def __post_init__(self):
        if not (isinstance(self.supi, str) and self.supi.isdigit()):
            raise ValueError(f"SUPI must be a non-empty digit string, got {self.supi!r}")


@dataclass(frozen=True)
class LocationData:
    cartesian: Optional[Position3D] = None
    geographic: Optional[tuple] = None  # (lat, lon, alt)

    def __post_init__(self):
        if self.cartesian is None and self.geographic is None:
            raise ValueError("LocationData needs at least one representation")


# --------------------------------------------------------------------------
# trace
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class TraceRecord:
    seq: int
    hop_label: str
    src: str
    dst: str
    message_type: str
    transaction_id: Optional[int]

    FIELDS = ("seq", "hop_label", "from", "to", "message_type", "transaction_id")

    def to_line(self):
        tid = "-" if self.transaction_id is None else str(self.transaction_id)
        return ",".join([str(self.seq), self.hop_label, self.src, self.dst, self.message_type, tid])

    @classmethod
    def from_line(cls, line):
        seq, hop, src, dst, mtype, tid = line.rstrip("\n").split(",")
        return cls(int(seq), hop, src, dst, mtype, None if tid == "-" else int(tid))


@dataclass
class ProcedureTrace:
    records: list = field(default_factory=list)
    envelopes: list = field(default_factory=list)
    handler_traces: dict = field(default_factory=dict)  # (gnb_id, transaction_id) -> [stage names]
    measurements: list = field(default_factory=list)  # estimator.ToaMeasurement at the LMF
    tdoas: object = None
    estimate: Optional[PositionEstimate] = None

    def add(self, hop_label, src, dst, message_type, transaction_id):
        rec = TraceRecord(len(self.records), str(hop_label), src, dst, message_type, transaction_id)
        self.records.append(rec)
        return rec

    def message_types(self):
        return [r.message_type for r in self.records]

    def to_lines(self):
        return [r.to_line() for r in self.records]

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(TraceRecord.FIELDS) + "\n")
            for line in self.to_lines():
                fh.write(line + "\n")


def read_trace(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != TraceRecord.FIELDS:
            raise ValueError(f"unexpected trace header {header}")
        return [TraceRecord.from_line(line) for line in fh if line.strip()]


# --------------------------------------------------------------------------
# network
# --------------------------------------------------------------------------
class Network:
    def __init__(self, hop_latency_s=1e-3, trace=None):
        self.hop_latency_s = hop_latency_s
        self.clock = 0.0
        self.entities = {}
        self.trace = trace if trace is not None else ProcedureTrace()
        self._queue = []
        self._order = itertools.count()

    def register(self, entity):
        self.entities[entity.entity_id] = entity

    def send(self, env, delay=0.0):
        self.trace.add(env.hop_label.value, env.src, env.dst, env.pdu.message_type, env.pdu.transaction_id)
        self.trace.envelopes.append(env)
        heapq.heappush(self._queue, (self.clock + delay + self.hop_latency_s, next(self._order), env))

    def run_until(self, done, deadline):
        while self._queue and self._queue[0][0] <= deadline:
            t, _, env = heapq.heappop(self._queue)
            self.clock = t
            if env.dst not in self.entities:
                raise RoutingError(f"no entity {env.dst!r} on the network")
            self.entities[env.dst].receive(env, self)
            if done():
                return True
        if done():
            return True
        self.clock = max(self.clock, deadline)
        return False


# --------------------------------------------------------------------------
# AMF
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class AmfRegistry:
    gnbs: tuple
    serving: dict


def amf_route(env, registry):
    """Relay one NRPPa transport envelope through the AMF."""
    pdu = env.pdu
    if env.src == LMF:
        if not registry.gnbs:
            raise RoutingError("no gNB registered at the AMF")
        if pdu.ue_associated:
            supi = pdu.scope.supi
            if supi not in registry.serving:
                raise UnknownUeError(f"no serving gNB for SUPI {supi}")
            return [MessageEnvelope.make(AMF, registry.serving[supi], pdu)]
        return [MessageEnvelope.make(AMF, g, pdu) for g in registry.gnbs]
    if env.src in registry.gnbs:
        return [MessageEnvelope.make(AMF, LMF, pdu)]
    raise RoutingError(f"envelope from unknown entity {env.src!r}")


class Amf:
    entity_id = AMF

    def __init__(self, registry):
        self.registry = registry

    def receive(self, env, net):
        for out in amf_route(env, self.registry):
            net.send(out)


# --------------------------------------------------------------------------
# gNB
# --------------------------------------------------------------------------
_F1AP_NAMES = {
    TrpInformationRequest: "TRP Information",
    PositioningInformationRequest: "Positioning Information",
    PositioningActivationRequest: "Positioning Activation",
    MeasurementRequest: "Measurement",
}


class Gnb:
    """Monolithic gNB: NGAP -> NRPPa -> RRC -> MAC (-> PHY) handler chain.

    ``phy`` maps ``(trp, srs_ie)`` to ``(received grid, pilot sequence)``; it
    stands in for the radio.  A measurement request whose SRS configuration
    names this gNB's cell is a serving-cell measurement; anything else is a
    neighbour-cell measurement tagged with the request's RNTI.
    """

    def __init__(self, gnb_id, trps, srs_ie, phy=None, rtoa_k=1, cell_id=None,
                 responsive=True, processing_s=1e-4, window=None):
        self.entity_id = gnb_id
        self.gnb_id = gnb_id
        self.trps = tuple(trps)
        ids = [t.trp_id for t in self.trps]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate TRP ids at {gnb_id}: {ids}")
        self.cell_id = gnb_id if cell_id is None else cell_id
        if srs_ie.serving_cell_id != self.cell_id:
            srs_ie = dataclasses.replace(srs_ie, serving_cell_id=self.cell_id)
        self.srs_ie = srs_ie
        self.phy = phy
        self.rtoa_k = rtoa_k
        self.responsive = responsive
        self.processing_s = processing_s
        self.window = window
        self.handler_log = []
        self.clock_s = 0.0

    # ---- timing --------------------------------------------------------
    def sfn_slot(self):
        cfg = self.srs_ie.config
        slots_per_frame = max(1, int(round(10 * cfg.subcarrier_spacing_hz / 15e3)))
        frame = 10e-3
        sfn = int(self.clock_s // frame) % 1024
        slot = int((self.clock_s % frame) // (frame / slots_per_frame)) % slots_per_frame
        return sfn, slot

    # ---- handler chain -------------------------------------------------
    def handle(self, pdu):
        if type(pdu.body) not in _F1AP_NAMES:
            raise ProtocolError(f"gNB cannot handle {pdu.message_type}")
        scope = "UE Associated" if pdu.ue_associated else "Non-UE Associated"
        name = _F1AP_NAMES[type(pdu.body)]
        stages = [
            f"NGAP:NGAP Downlink {scope} NRPPa Transport",
            f"NRPPa:Downlink {scope} NRPPa Transport",
            f"RRC:F1AP: {name} Request",
            f"MAC:F1AP: {name} Request",
        ]
        body = self._mac(pdu, stages)
        stages += [
            f"RRC:F1AP: {name} Response",
            f"NRPPa:F1AP: {name} Response",
            f"NGAP:Uplink {scope} NRPPa Transport",
        ]
        self.handler_log.append((pdu.transaction_id, stages))
        return NrppaPdu(pdu.transaction_id, pdu.scope, body)

    def _mac(self, pdu, stages):
        req = pdu.body
        if isinstance(req, TrpInformationRequest):
            return TrpInformationResponse(self.trps)
        if isinstance(req, PositioningInformationRequest):
            # SRS is fixed by gNB configuration; requested characteristics are ignored
            return PositioningInformationResponse(self.srs_ie)
        if isinstance(req, PositioningActivationRequest):
            # SRS is preactivated; report the current frame timing
            sfn, slot = self.sfn_slot()
            return PositioningActivationResponse(sfn=sfn, slot=slot)
        return self._measure(req, stages)

    def _measure(self, req, stages):
        if req.srs.serving_cell_id == self.cell_id:
            stages.append("MAC:serving-cell SRS measurement")
            rnti = None
        else:
            stages.append(f"MAC:neighbour-cell SRS activation RNTI=0x{req.measurement_rnti:04X}")
            rnti = req.measurement_rnti
        stages.append("PHY:FAPI: Measurement Request")

        wanted = set(req.trp_ids) if req.trp_ids else None
        results, failures, phy_meas = [], [], []
        for trp in self.trps:
            if wanted is not None and trp.trp_id not in wanted:
                continue
            try:
                if self.phy is None:
                    raise EstimationError("no radio attached")
                rx, seq = self.phy(trp, req.srs)
                per_antenna = estimator.estimate_toa(
                    rx, seq, req.srs.config, window=self.window, trp_id=trp.trp_id, rtoa_k=self.rtoa_k
                )
            except (EstimationError, ValueError) as exc:
                failures.append(MeasurementFailureCause(trp.trp_id, str(exc)))
                continue
            best = max(per_antenna, key=lambda m: m.rsrp_dbfs)
            phy_meas.append(best)

        indication = encode_srs_indication(phy_meas) if phy_meas else None
        stages.append(
            "PHY:FAPI: SRS.indication "
            + (indication.to_bytes().hex() if indication is not None else "empty")
            + ("" if rnti is None else f" RNTI=0x{rnti:04X}")
        )
        stages.append("MAC:FAPI: Measurement Response")
        for m in phy_meas:
            results.append(TrpMeasurement(m.trp_id, m.ul_rtoa_index, m.rtoa_k, m.rx_tx_diff_s, m.rsrp_dbfs))

        if not results and failures:
            return MeasurementFailure(tuple(failures))
        return MeasurementResponse(tuple(results), tuple(failures))

    # ---- transport -----------------------------------------------------
    def receive(self, env, net):
        self.clock_s = net.clock
        response = self.handle(env.pdu)
        net.trace.handler_traces[(self.gnb_id, env.pdu.transaction_id)] = self.handler_log[-1][1]
        if self.responsive:
            net.send(MessageEnvelope.make(self.gnb_id, AMF, response), delay=self.processing_s)


def gnb_handle(pdu, gnb):
    return gnb.handle(pdu)


# --------------------------------------------------------------------------
# LMF
# --------------------------------------------------------------------------
@dataclass
class World:
    gnbs: list
    serving: dict  # supi -> gnb_id
    fixed_z: float = 1.3
    timeout_s: float = 2.0
    hop_latency_s: float = 1e-3
    tol: float = DEFAULT_TOL_M
    max_iter: int = DEFAULT_MAX_ITER

    def registry(self):
        return AmfRegistry(tuple(g.gnb_id for g in self.gnbs), dict(self.serving))


class Lmf:
    entity_id = LMF

    def __init__(self, net, n_gnbs, timeout_s=2.0):
        self.net = net
        self.n_gnbs = n_gnbs
        self.timeout_s = timeout_s
        self._tids = itertools.count(1)
        self._responses = {}

    def receive(self, env, net):
        self._responses.setdefault(env.pdu.transaction_id, []).append(env.pdu)

    def transact(self, scope, body, expected):
        """Send one request and wait for ``expected`` responses or the timeout."""
        pdu = NrppaPdu(next(self._tids), scope, body)
        self._responses[pdu.transaction_id] = []
        self.net.send(MessageEnvelope.make(LMF, AMF, pdu))
        got = self._responses[pdu.transaction_id]
        self.net.run_until(lambda: len(got) >= expected, self.net.clock + self.timeout_s)
        if not got:
            raise ProcedureTimeout(f"no {pdu.message_type} answer within {self.timeout_s} s")
        return list(got)


def _dequantized(trp_meas):
    return estimator.ToaMeasurement(
        trp_id=trp_meas.trp_id,
        toa_s=dequantize_ul_rtoa(trp_meas.ul_rtoa_index, trp_meas.k),
        peak_index=-1,
        ul_rtoa_index=trp_meas.ul_rtoa_index,
        rsrp_dbfs=trp_meas.rsrp_dbfs,
        rx_tx_diff_s=trp_meas.rx_tx_diff_s,
        rtoa_k=trp_meas.k,
    )


def lmf_run_procedure(input_data, world):
    """Run the UL-TDoA procedure for one UE.  Returns ``(LocationData, ProcedureTrace)``."""
    trace = ProcedureTrace()
    net = Network(world.hop_latency_s, trace)
    net.register(Amf(world.registry()))
    for g in world.gnbs:
        net.register(g)
    lmf = Lmf(net, len(world.gnbs), world.timeout_s)
    net.register(lmf)

    trace.add(DETERMINE_LOCATION_HOP, LCS_CLIENT, LMF, "DetermineLocationRequest", None)
    supi = input_data.supi
    if supi not in world.serving:
        raise UnknownUeError(f"SUPI {supi} is not registered")
    ue_scope = UeAssociated(supi)

    trps = {}
    for resp in lmf.transact(NonUeAssociated(), TrpInformationRequest(), len(world.gnbs)):
        for trp in resp.body.trps:
            if trp.trp_id in trps:
                raise ProtocolError(f"TRP id {trp.trp_id} reported twice")
            trps[trp.trp_id] = trp

    (pos_info,) = lmf.transact(ue_scope, PositioningInformationRequest(), 1)
    srs_ie = pos_info.body.srs

    lmf.transact(ue_scope, PositioningActivationRequest(srs_ie.srs_resource_set_id, 1), 1)

    measured = []
    meas_req = MeasurementRequest(tuple(sorted(trps)), srs_ie, POSITIONING_RNTI)
    for resp in lmf.transact(NonUeAssociated(), meas_req, len(world.gnbs)):
        if isinstance(resp.body, MeasurementFailure):
            for f in resp.body.failures:
                log.warning("TRP %s measurement failed: %s", f.trp_id, f.cause)
            continue
        measured.extend(resp.body.measurements)
    measured.sort(key=lambda m: m.trp_id)

    if len(measured) < 3:
        raise InsufficientMeasurementsError(
            f"insufficient measurements: {len(measured)} TRP(s) reported, need >= 3"
        )
    toas = [_dequantized(m) for m in measured]
    ref = select_reference(toas)
    positions = {t: trps[t].location for t in (m.trp_id for m in toas)}
    tdoas = toa_to_tdoa(toas, ref, positions)
    if tdoas.n_non_reference >= 3:
        init = ls_position(tdoas, world.fixed_z)
    else:
        centroid = np.mean([p.as_array() for p in positions.values()], axis=0)
        init = PositionEstimate(Position3D(centroid[0], centroid[1], world.fixed_z), float("inf"))
    est = nlls_refine(tdoas, init, world.fixed_z, world.tol, world.max_iter)

    trace.measurements = toas
    trace.tdoas = tdoas
    trace.estimate = est
    trace.add(DETERMINE_LOCATION_HOP, LMF, LCS_CLIENT, "DetermineLocationResponse", None)
    return LocationData(cartesian=est.position), trace
