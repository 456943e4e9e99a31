"""Independent reference computations and frozen values used by the tests.

Nothing in here calls the pipeline stages it is used to check.  Values marked
FROZEN were computed by hand (or by the formula next to them) before the code
under test existed and must not be regenerated from it.
"""
import numpy as np

C = 299_792_458.0
T_S = 1.0 / 61.44e6
T_C = 1.0 / (480_000 * 4096)

# FROZEN: (37 / 16) / 61.44e6
TOA_PEAK_37_L16 = 3.7638346354166664e-08
# FROZEN: round(5.72717e-7 / T_C) for k = 0 and k = 1
RTOA_LOG_TOA = 5.72717e-07
RTOA_LOG_K0 = 1126
RTOA_LOG_K1 = 563
# FROZEN: ZC root 1 over N_ZC = 3
ZC3_ROOT1 = np.array([1.0, np.exp(-2j * np.pi / 3), 1.0])
# FROZEN: 1 byte usage 5, 1 byte tag 1, count 2, then 1000 and 65535 big-endian
FAPI_1000_65535 = bytes.fromhex("05010002" "03e8" "ffff")

# TRP positions printed in the reference LMF log
PAPER_LOG_TRPS = ((1, (0.0, 0.0, 2.0)), (2, (-9.0, 0.0, 2.0)), (3, (-27.0, 0.0, 2.0)), (4, (-36.0, 0.0, 2.0)))


def signed_index(n_sc):
    return np.arange(n_sc) - n_sc // 2


def channel_response(n_sc, n_fft, t_s, paths):
    """H at each allocated subcarrier by direct evaluation of the path sum."""
    f = signed_index(n_sc) / (n_fft * t_s)
    return sum(g * np.exp(-2j * np.pi * f * d) for d, g in paths)


def comb_fill(pilots, k0, k_tc, n_sc):
    """Complex-linear fill between comb pilots.

    Outside the comb the line through the two outermost pilots is followed
    for up to one comb period, then held.
    """
    pos = k0 + k_tc * np.arange(len(pilots))
    k = np.arange(n_sc)
    # np.interp holds past its end points, so one extra point one comb period
    # beyond each edge pilot gives exactly that rule
    lo_val = 2 * pilots[0] - pilots[1]
    hi_val = 2 * pilots[-1] - pilots[-2]
    xp = np.concatenate([[pos[0] - k_tc], pos, [pos[-1] + k_tc]])
    fp = np.concatenate([[lo_val], pilots, [hi_val]])
    return np.interp(k, xp, fp.real) + 1j * np.interp(k, xp, fp.imag)


def brute_force_cir(h_band, n_fft, oversampling):
    """h(t) = 1/(L N) sum_k H_k exp(j 2 pi s_k t / (L N)) with signed bin s_k."""
    n_sc = len(h_band)
    s = signed_index(n_sc)
    big_n = oversampling * n_fft
    t = np.arange(big_n)
    kernel = np.exp(2j * np.pi * np.outer(t, s) / big_n)
    return kernel @ h_band / big_n


def pipeline_oracle_cir(cfg, paths):
    """CIR the estimator must produce for a noiseless channel and any pilots."""
    h = channel_response(cfg.n_sc, cfg.n_fft, cfg.sample_period_s, paths)
    pilots = h[cfg.k0 + cfg.k_tc * np.arange(cfg.m_sc)]
    band = comb_fill(pilots, cfg.k0, cfg.k_tc, cfg.n_sc)
    return brute_force_cir(band, cfg.n_fft, cfg.oversampling)


def tdoa_from_geometry(anchors, ue, ref=0):
    d = np.linalg.norm(np.asarray(anchors, float) - np.asarray(ue, float), axis=1)
    return (d - d[ref]) / C


def grid_search(anchors, rd, z, ref, xs, ys):
    """Exhaustive sum-of-squares TDoA cost, numpy only."""
    anchors = np.asarray(anchors, float)
    X, Y = np.meshgrid(xs, ys)
    P = np.stack([X, Y, np.full_like(X, z)], axis=-1)
    d = np.linalg.norm(P[..., None, :] - anchors, axis=-1)
    cost = ((d - d[..., ref : ref + 1]) - rd) ** 2
    return cost.sum(axis=-1)


def central_difference(fn, x, h=1e-6):
    x = np.asarray(x, float)
    cols = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((fn(x + e) - fn(x - e)) / (2 * h))
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# protocol: expected trace from the routing rules alone
# ---------------------------------------------------------------------------
def expected_trace(gnb_ids, serving):
    """Message-by-message trace for one procedure with every gNB answering.

    Rules: non-UE-associated requests go LMF->AMF->every gNB, UE-associated
    requests LMF->AMF->serving gNB.  Every delivery is answered, answers
    come back gNB->AMF->LMF.  Hop latency is the same on every link and gNBs
    answer after the same processing delay, so deliveries keep gNB order.
    """
    rows = [("Nlmf_DetermineLocation", "LCS-Client", "LMF", "DetermineLocationRequest", None)]

    def exchange(req, resp, tid, ue):
        targets = [serving] if ue else list(gnb_ids)
        dl = ("Namf_N1N2_Transfer", "NGAP_DL_UE") if ue else ("Namf_NonUE_N2_Transfer", "NGAP_DL_NonUE")
        ul = ("NGAP_UL_UE", "Namf_N2_Notify") if ue else ("NGAP_UL_NonUE", "Namf_NonUE_N2_Notify")
        rows.append((dl[0], "LMF", "AMF", req, tid))
        rows.extend((dl[1], "AMF", g, req, tid) for g in targets)
        rows.extend((ul[0], g, "AMF", resp, tid) for g in targets)
        rows.extend((ul[1], "AMF", "LMF", resp, tid) for _ in targets)

    exchange("TRPInformationRequest", "TRPInformationResponse", 1, False)
    exchange("PositioningInformationRequest", "PositioningInformationResponse", 2, True)
    exchange("PositioningActivationRequest", "PositioningActivationResponse", 3, True)
    exchange("MeasurementRequest", "MeasurementResponse", 4, False)
    rows.append(("Nlmf_DetermineLocation", "LMF", "LCS-Client", "DetermineLocationResponse", None))
    return [(i,) + r for i, r in enumerate(rows)]
