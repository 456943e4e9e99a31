"""Scenario files: YAML description of gNBs/TRPs, the target UE, SRS
numerology, channel and solver settings.

Validation errors name the offending field and, where the YAML node is
known, its line number.
"""
import dataclasses
import math
import re
from dataclasses import dataclass, field

import yaml

from ..channel import Position3D
from ..estimator import rtoa_step
from ..locator import DEFAULT_MAX_ITER, DEFAULT_TOL_M
from ..protocol import Gnb, Plmn, SrsConfigurationIe, TrpInformation, World
from ..signal import SrsConfig
from ..uplink import UplinkSimulator

DEFAULT_SUPI = "001010000000001"
DEFAULT_PLMN = Plmn("001", "01")


class ScenarioError(ValueError):
    def __init__(self, message, path="", line=None, source=None):
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if path:
            where.append(path)
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.message = message
        self.path = path
        self.line = line


def _is_real(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


@dataclass(frozen=True)
class GnbConfig:
    gnb_id: str
    trps: tuple
    sequence_root: int = 1
    srs_resource_set_id: int = 0
    responsive: bool = True


@dataclass(frozen=True)
class UeConfig:
    supi: str
    truth: Position3D
    serving_gnb: str


@dataclass(frozen=True)
class ChannelParams:
    snr_db: float = None
    multipath: tuple = ()  # (excess_delay_s, relative_gain)
    clock_offset_s: float = 0.0

    def __post_init__(self):
        if self.snr_db is not None and not _is_real(self.snr_db):
            raise ValueError(f"snr_db must be a number or null, got {self.snr_db!r}")
        if not _is_real(self.clock_offset_s):
            raise ValueError(f"clock_offset_s must be a number, got {self.clock_offset_s!r}")
        for excess, _ in self.multipath:
            if not (_is_real(excess) and excess >= 0):
                raise ValueError(f"multipath excess delay must be >= 0, got {excess!r}")


@dataclass(frozen=True)
class SolverConfig:
    fixed_z: float = 1.3
    tol: float = DEFAULT_TOL_M
    max_iter: int = DEFAULT_MAX_ITER
    timeout_s: float = 2.0
    hop_latency_s: float = 1e-3

    def __post_init__(self):
        for name in ("fixed_z", "tol", "timeout_s", "hop_latency_s"):
            if not _is_real(getattr(self, name)):
                raise ValueError(f"{name} must be a number, got {getattr(self, name)!r}")
        if self.tol <= 0 or self.timeout_s <= 0 or self.hop_latency_s < 0:
            raise ValueError("tol and timeout_s must be > 0 and hop_latency_s >= 0")
        if isinstance(self.max_iter, bool) or not isinstance(self.max_iter, int) or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    gnbs: tuple
    ue: UeConfig
    srs: SrsConfig = field(default_factory=SrsConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    solver: SolverConfig = field(default_factory=SolverConfig)
    rtoa_k: int = 1
    seed: int = 0

    def __post_init__(self):
        validate(self)

    @property
    def trps(self):
        return [t for g in self.gnbs for t in g.trps]

    def with_ue(self, truth):
        return dataclasses.replace(self, ue=dataclasses.replace(self.ue, truth=truth))


def validate(cfg):
    if not cfg.gnbs:
        raise ScenarioError("at least one gNB is required", "gnbs")
    ids = [g.gnb_id for g in cfg.gnbs]
    if len(set(ids)) != len(ids):
        raise ScenarioError(f"duplicate gNB ids {ids}", "gnbs")
    trp_ids = [t.trp_id for t in cfg.trps]
    if len(trp_ids) < 3:
        raise ScenarioError(f"at least 3 TRPs are required in total, got {len(trp_ids)}", "gnbs")
    if len(set(trp_ids)) != len(trp_ids):
        raise ScenarioError(f"TRP ids must be unique across gNBs, got {trp_ids}", "gnbs")
    if not (cfg.ue.supi.isdigit()):
        raise ScenarioError(f"SUPI must be a digit string, got {cfg.ue.supi!r}", "ue.supi")
    if cfg.ue.serving_gnb not in ids:
        raise ScenarioError(f"serving gNB {cfg.ue.serving_gnb!r} is not configured", "ue.serving_gnb")
    try:
        rtoa_step(cfg.rtoa_k)
    except ValueError as exc:
        raise ScenarioError(str(exc), "rtoa_k") from None


# --------------------------------------------------------------------------
# YAML -> config
# --------------------------------------------------------------------------
class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats such as ``1e-3`` as numbers."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


class _Doc:
    """Plain data plus a path -> line index built from the YAML node tree."""

    def __init__(self, node, source=None):
        self.lines = {}
        self.source = source
        self.data = self._build(node, "") if node is not None else {}

    def _build(self, node, path):
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            out = {}
            for k, v in node.value:
                key = k.value
                out[key] = self._build(v, f"{path}.{key}" if path else key)
            return out
        if isinstance(node, yaml.SequenceNode):
            return [self._build(v, f"{path}[{i}]") for i, v in enumerate(node.value)]
        return yaml.load(yaml.serialize(node), Loader=_Loader)

    def error(self, path, message):
        line = None
        p = path
        while p and line is None:
            line = self.lines.get(p)
            p = p.rsplit(".", 1)[0] if "." in p else (p.rsplit("[", 1)[0] if "[" in p else "")
        return ScenarioError(message, path, line, self.source)


def _req(doc, mapping, key, path):
    if not isinstance(mapping, dict) or key not in mapping:
        raise doc.error(path, f"missing required field '{key}'")
    return mapping[key]


def _position(doc, value, path):
    if isinstance(value, dict):
        value = [value.get("x"), value.get("y"), value.get("z")]
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise doc.error(path, "position must be [x, y, z] or {x, y, z}")
    try:
        return Position3D(*(float(v) for v in value))
    except (TypeError, ValueError) as exc:
        raise doc.error(path, f"invalid position: {exc}") from None


def _build(doc, only_fields, cls, data, path):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise doc.error(path, "expected a mapping")
    unknown = set(data) - set(only_fields)
    if unknown:
        raise doc.error(path, f"unknown field(s) {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise doc.error(path, str(exc)) from None


def _gain(value):
    if isinstance(value, (list, tuple)):
        re, im = value
        return complex(float(re), float(im))
    return complex(float(value))


def config_from_doc(doc):
    data = doc.data
    if not isinstance(data, dict):
        raise doc.error("", "scenario must be a mapping")

    gnbs = []
    raw_gnbs = _req(doc, data, "gnbs", "gnbs")
    if not isinstance(raw_gnbs, list):
        raise doc.error("gnbs", "expected a list of gNBs")
    for gi, g in enumerate(raw_gnbs):
        gp = f"gnbs[{gi}]"
        gnb_id = str(_req(doc, g, "gnb_id", f"{gp}.gnb_id"))
        plmn_raw = g.get("plmn", {"mcc": DEFAULT_PLMN.mcc, "mnc": DEFAULT_PLMN.mnc})
        try:
            plmn = Plmn(str(plmn_raw["mcc"]), str(plmn_raw["mnc"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise doc.error(f"{gp}.plmn", f"invalid PLMN: {exc}") from None
        trps = []
        raw_trps = _req(doc, g, "trps", f"{gp}.trps")
        if not isinstance(raw_trps, list):
            raise doc.error(f"{gp}.trps", "expected a list of TRPs")
        for ti, t in enumerate(raw_trps):
            tp = f"{gp}.trps[{ti}]"
            try:
                trp_id = int(_req(doc, t, "trp_id", f"{tp}.trp_id"))
                unc = float(t.get("uncertainty_m", 0.0))
                trps.append(
                    TrpInformation(trp_id, plmn, _position(doc, _req(doc, t, "location", f"{tp}.location"),
                                                           f"{tp}.location"), unc)
                )
            except (TypeError, ValueError) as exc:
                if isinstance(exc, ScenarioError):
                    raise
                raise doc.error(tp, str(exc)) from None
        gnbs.append(
            GnbConfig(
                gnb_id,
                tuple(trps),
                int(g.get("sequence_root", 1)),
                int(g.get("srs_resource_set_id", 0)),
                bool(g.get("responsive", True)),
            )
        )

    ue_raw = _req(doc, data, "ue", "ue")
    ue = UeConfig(
        str(ue_raw.get("supi", DEFAULT_SUPI)),
        _position(doc, _req(doc, ue_raw, "truth", "ue.truth"), "ue.truth"),
        str(ue_raw.get("serving_gnb", gnbs[0].gnb_id if gnbs else "")),
    )

    srs_fields = [f.name for f in dataclasses.fields(SrsConfig)]
    srs_raw = data.get("srs")
    if isinstance(srs_raw, dict) and "sample_rate_hz" in srs_raw:
        srs_raw = dict(srs_raw)
        srs_raw["sample_period_s"] = 1.0 / float(srs_raw.pop("sample_rate_hz"))
    srs = _build(doc, srs_fields, SrsConfig, srs_raw, "srs")

    ch_raw = data.get("channel")
    if isinstance(ch_raw, dict) and "multipath" in ch_raw:
        ch_raw = dict(ch_raw)
        try:
            ch_raw["multipath"] = tuple((float(a), _gain(b)) for a, b in ch_raw["multipath"])
        except (TypeError, ValueError) as exc:
            raise doc.error("channel.multipath", f"expected [[excess_delay_s, gain], ...]: {exc}") from None
    channel = _build(doc, [f.name for f in dataclasses.fields(ChannelParams)], ChannelParams, ch_raw, "channel")
    solver = _build(doc, [f.name for f in dataclasses.fields(SolverConfig)], SolverConfig, data.get("solver"), "solver")

    unknown = set(data) - {"gnbs", "ue", "srs", "channel", "solver", "rtoa_k", "seed"}
    if unknown:
        raise doc.error("", f"unknown top-level field(s) {sorted(unknown)}")
    try:
        return ScenarioConfig(
            tuple(gnbs), ue, srs, channel, solver, int(data.get("rtoa_k", 1)), int(data.get("seed", 0))
        )
    except ScenarioError as exc:
        raise doc.error(exc.path, exc.message) from None


def parse_scenario(text, source=None):
    try:
        node = yaml.compose(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ScenarioError(f"parse error: {getattr(exc, 'problem', exc)}", line=line, source=source) from None
    return config_from_doc(_Doc(node, source))


def load_scenario(path):
    with open(path) as fh:
        return parse_scenario(fh.read(), source=str(path))


def scenario_to_dict(cfg):
    """Inverse of ``load_scenario`` (modulo defaults), for writing files."""
    return {
        "gnbs": [
            {
                "gnb_id": g.gnb_id,
                "plmn": {"mcc": g.trps[0].plmn.mcc, "mnc": g.trps[0].plmn.mnc} if g.trps else None,
                "sequence_root": g.sequence_root,
                "srs_resource_set_id": g.srs_resource_set_id,
                "responsive": g.responsive,
                "trps": [
                    {"trp_id": t.trp_id, "location": [t.location.x, t.location.y, t.location.z],
                     "uncertainty_m": t.uncertainty_m}
                    for t in g.trps
                ],
            }
            for g in cfg.gnbs
        ],
        "ue": {"supi": cfg.ue.supi, "truth": [cfg.ue.truth.x, cfg.ue.truth.y, cfg.ue.truth.z],
               "serving_gnb": cfg.ue.serving_gnb},
        "srs": cfg.srs.to_dict(),
        "channel": {"snr_db": cfg.channel.snr_db,
                    "multipath": [[d, [g.real, g.imag]] for d, g in cfg.channel.multipath],
                    "clock_offset_s": cfg.channel.clock_offset_s},
        "solver": dataclasses.asdict(cfg.solver),
        "rtoa_k": cfg.rtoa_k,
        "seed": cfg.seed,
    }


# --------------------------------------------------------------------------
# config -> simulated world
# --------------------------------------------------------------------------
def build_world(cfg, ue_position=None, seed=None):
    """Fresh gNB/AMF world with the UE radiating from ``ue_position``."""
    ue = cfg.ue.truth if ue_position is None else ue_position
    radio = UplinkSimulator(
        ue,
        snr_db=cfg.channel.snr_db,
        multipath=cfg.channel.multipath,
        seed=cfg.seed if seed is None else seed,
        clock_offset_s=cfg.channel.clock_offset_s,
    )
    gnbs = []
    for g in cfg.gnbs:
        srs_ie = SrsConfigurationIe(cfg.srs, g.srs_resource_set_id, g.sequence_root, g.gnb_id)
        gnbs.append(Gnb(g.gnb_id, g.trps, srs_ie, phy=radio.receive, rtoa_k=cfg.rtoa_k,
                        responsive=g.responsive))
    return World(
        gnbs,
        {cfg.ue.supi: cfg.ue.serving_gnb},
        fixed_z=cfg.solver.fixed_z,
        timeout_s=cfg.solver.timeout_s,
        hop_latency_s=cfg.solver.hop_latency_s,
        tol=cfg.solver.tol,
        max_iter=cfg.solver.max_iter,
    )
