"""
Multi-order deviation average (MDA) estimation.

Peaks of a presampled spectrum are matched to comb orders: the difference line
of order n sits at f - n·f_c, so adding n·f_c back to its bin frequency
reconstructs f up to the picket-fence deviation of that order. Averaging the
reconstructions over orders 0 .. N-1 cancels most of those deviations.
"""
import dataclasses
import itertools
import logging
import math
import statistics
import typing as t

from mdatools import deviation, model, spectral, utils
from mdatools.deviation import DeviationRecord, DomainError

logger = logging.getLogger(__name__)


class EstimationFailure(RuntimeError):
    pass


class AmbiguousAssignment(EstimationFailure):
    def __init__(self, shared_bins: t.Dict[int, t.List[int]]) -> None:
        super().__init__(shared_bins)
        self.shared_bins = shared_bins

    def __str__(self) -> str:
        described = ", ".join(
            f"bin {bin_} (clusters {', '.join(map(str, clusters))})"
            for bin_, clusters in sorted(self.shared_bins.items())
        )
        return f"Peaks claimed by more than one tone cluster: {described}"


@dataclasses.dataclass(frozen=True)
class ZoneMeasurement:
    order: int
    measured_bin: int
    refined_offset_bins: t.Optional[float]
    zone_freq_hz: float
    reconstructed_hz: float
    deviation_hz: t.Optional[float] = None
    degenerate: bool = False

    @classmethod
    def from_bin(
        cls,
        order: int,
        measured_bin: int,
        comb: model.CombSpec,
        grid: model.FrequencyGrid,
        refined_offset_bins: t.Optional[float] = None,
        truth_hz: t.Optional[float] = None,
        degenerate: bool = False,
    ) -> "ZoneMeasurement":
        zone_freq_hz = grid.bin_frequency(measured_bin + (refined_offset_bins or 0.0))
        reconstructed_hz = deviation.reconstruct(zone_freq_hz, comb, order)
        return cls(
            order=order,
            measured_bin=measured_bin,
            refined_offset_bins=refined_offset_bins,
            zone_freq_hz=zone_freq_hz,
            reconstructed_hz=reconstructed_hz,
            deviation_hz=None if truth_hz is None else reconstructed_hz - truth_hz,
            degenerate=degenerate,
        )


@dataclasses.dataclass(frozen=True)
class MdaEstimate:
    zones: t.List[ZoneMeasurement]
    estimate_hz: float
    avg_deviation_hz: t.Optional[float]
    order_count: int
    truth_hz: t.Optional[float] = None

    @property
    def max_abs_zone_deviation_hz(self) -> t.Optional[float]:
        if self.truth_hz is None:
            return None
        return max(abs(zone.reconstructed_hz - self.truth_hz) for zone in self.zones)

    @property
    def degenerate_orders(self) -> t.List[int]:
        return [zone.order for zone in self.zones if zone.degenerate]


@dataclasses.dataclass(frozen=True)
class DeviationPrediction:
    records: t.List[DeviationRecord]
    average_bins: float
    average_hz: float

    @property
    def max_abs_hz(self) -> float:
        return max(abs(record.deviation_hz) for record in self.records)

    @property
    def worst_order(self) -> int:
        return max(self.records, key=lambda record: abs(record.deviation_hz)).order


@dataclasses.dataclass(frozen=True)
class _Candidate:
    peak_index: int
    bin: int
    order: int
    reconstructed_hz: float


@dataclasses.dataclass(frozen=True)
class _Cluster:
    members: t.List[_Candidate]

    @property
    def centre_hz(self) -> float:
        return statistics.median(member.reconstructed_hz for member in self.members)

    @property
    def peak_indices(self) -> t.Set[int]:
        return {member.peak_index for member in self.members}


def associate_orders(
    peaks: t.Sequence[spectral.Peak],
    comb: model.CombSpec,
    grid: model.FrequencyGrid,
    order_count: int,
    priors_hz: t.Optional[t.Sequence[float]] = None,
    tolerance_bins: float = 1.0,
) -> t.List[t.Tuple[int, ZoneMeasurement]]:
    """
    Match peaks to comb orders, one peak per order 0 .. order_count - 1 per tone.

    Every (peak, order) pair reconstructs a candidate fundamental. Candidates
    chaining within tolerance_bins of each other form a cluster, and clusters
    missing an order are dropped. Presampling cannot tell a tone from its
    aliases a multiple of f_c away, so with priors each prior picks the nearest
    complete cluster within f_c/2 and the cluster id is the prior's index. When
    two priors land on one alias family, the prior further from its cluster
    loses it. Without priors every complete cluster is returned, numbered by frequency.
    """
    if order_count < 1:
        raise DomainError(f"At least one order is required, got {order_count}")
    if not peaks:
        raise EstimationFailure("No spectral peaks to associate")

    tolerance_hz = tolerance_bins * grid.resolution_hz
    candidates = _candidates(peaks, comb, grid, order_count)
    clusters = _complete_clusters(_link(candidates, tolerance_hz), order_count)
    if not clusters:
        raise EstimationFailure(
            f"No cluster of peaks covers all {order_count} comb orders"
        )

    if priors_hz is None:
        selected = dict(enumerate(clusters))
    else:
        selected = _select_by_prior(clusters, priors_hz, comb.rep_rate_hz / 2)
        # Centres of one alias family differ by whole comb periods, give or
        # take a bin of deviation on each side
        selected = _drop_aliases(
            selected, priors_hz, comb.rep_rate_hz, 2 * tolerance_hz
        )
        if not selected:
            raise EstimationFailure(
                "No complete cluster lies within half a comb period of any tone prior"
            )

    _check_partition(selected, peaks)
    return [
        (cluster_id, ZoneMeasurement.from_bin(member.order, member.bin, comb, grid))
        for cluster_id, cluster in sorted(selected.items())
        for member in cluster.members
    ]


def group_by_cluster(
    assignments: t.Iterable[t.Tuple[int, ZoneMeasurement]]
) -> t.Dict[int, t.List[ZoneMeasurement]]:
    grouped = utils.full_groupby(assignments, key=lambda item: item[0])
    return {
        cluster_id: [zone for _, zone in members] for cluster_id, members in grouped
    }


def mda_estimate(
    zones: t.Sequence[ZoneMeasurement],
    comb: model.CombSpec,
    truth_hz: t.Optional[float] = None,
) -> MdaEstimate:
    if not zones:
        raise DomainError("At least one zone measurement is required")

    duplicated = [
        order for order, group in utils.full_groupby(zones, key=lambda zone: zone.order)
        if len(list(group)) > 1
    ]
    if duplicated:
        raise DomainError(f"Orders measured more than once: {duplicated}")
    orders = sorted(zone.order for zone in zones)
    if orders != list(range(len(zones))):
        raise DomainError(
            f"Zones must cover orders 0 .. {len(zones) - 1} exactly, got {orders}"
        )

    zones = [
        dataclasses.replace(
            zone,
            reconstructed_hz=deviation.reconstruct(
                zone.zone_freq_hz, comb, zone.order
            ),
        )
        for zone in sorted(zones, key=lambda zone: zone.order)
    ]
    if truth_hz is not None:
        zones = [
            dataclasses.replace(zone, deviation_hz=zone.reconstructed_hz - truth_hz)
            for zone in zones
        ]

    estimate_hz = math.fsum(zone.reconstructed_hz for zone in zones) / len(zones)
    return MdaEstimate(
        zones=zones,
        estimate_hz=estimate_hz,
        avg_deviation_hz=None if truth_hz is None else estimate_hz - truth_hz,
        order_count=len(zones),
        truth_hz=truth_hz,
    )


def mda_quad_estimate(
    spec: spectral.Spectrum,
    zones: t.Sequence[ZoneMeasurement],
    comb: model.CombSpec,
    truth_hz: t.Optional[float] = None,
    scale: model.InterpolationScale = model.InterpolationScale.LINEAR,
) -> MdaEstimate:
    refined = []
    for zone in zones:
        interpolation = spectral.quad_interp(spec, zone.measured_bin, scale)
        if interpolation.degenerate:
            logger.debug(
                "Degenerate interpolation at bin %d (order %d)",
                zone.measured_bin,
                zone.order,
            )
        refined.append(
            ZoneMeasurement.from_bin(
                zone.order,
                zone.measured_bin,
                comb,
                spec.grid,
                refined_offset_bins=interpolation.offset_bins,
                degenerate=interpolation.degenerate,
            )
        )
    return mda_estimate(refined, comb, truth_hz=truth_hz)


def predict_deviation(
    f_in_hz: float,
    comb: model.CombSpec,
    grid: model.FrequencyGrid,
    order_count: int,
) -> DeviationPrediction:
    if order_count < 1:
        raise DomainError(f"At least one order is required, got {order_count}")

    delta = deviation.index_of(f_in_hz, grid).fractional_part
    records = []
    for order in range(order_count):
        deviation.copy_frequency(f_in_hz, comb, order)
        deviation_bins = deviation.delta_order(delta, comb.epsilon, order)
        records.append(
            DeviationRecord(
                order=order,
                deviation_bins=deviation_bins,
                deviation_hz=deviation_bins * grid.resolution_hz,
            )
        )

    average_bins = deviation.delta_mda(delta, comb.epsilon, order_count)
    return DeviationPrediction(
        records=records,
        average_bins=average_bins,
        average_hz=average_bins * grid.resolution_hz,
    )


def mirror_gap_bins(
    f_in_hz: float, comb: model.CombSpec, grid: model.FrequencyGrid
) -> float:
    """
    Spacing between the lines f - n·f_c of a tone and the lines j·f_c - f folded
    back through DC, which is |2f - k·f_c| for the nearest comb multiple k·f_c
    """
    twice_hz = 2 * f_in_hz
    periods = round(twice_hz / comb.rep_rate_hz)
    return abs(twice_hz - periods * comb.rep_rate_hz) / grid.resolution_hz


def _candidates(
    peaks: t.Sequence[spectral.Peak],
    comb: model.CombSpec,
    grid: model.FrequencyGrid,
    order_count: int,
) -> t.List[_Candidate]:
    return sorted(
        (
            _Candidate(
                peak_index=index,
                bin=peak.bin,
                order=order,
                reconstructed_hz=deviation.reconstruct(
                    grid.bin_frequency(peak.bin), comb, order
                ),
            )
            for index, peak in enumerate(peaks)
            for order in range(order_count)
        ),
        key=lambda candidate: (candidate.reconstructed_hz, candidate.order),
    )


def _link(candidates: t.List[_Candidate], tolerance_hz: float) -> t.List[_Cluster]:
    """Single-linkage grouping of candidates sorted by reconstructed frequency"""
    groups: t.List[t.List[_Candidate]] = []
    for candidate in candidates:
        gap_hz = (
            candidate.reconstructed_hz - groups[-1][-1].reconstructed_hz
            if groups
            else math.inf
        )
        if gap_hz <= tolerance_hz:
            groups[-1].append(candidate)
        else:
            groups.append([candidate])
    return [_Cluster(group) for group in groups]


def _complete_clusters(
    clusters: t.List[_Cluster], order_count: int
) -> t.List[_Cluster]:
    complete = []
    for cluster in clusters:
        centre_hz = cluster.centre_hz

        def distance(member: _Candidate) -> t.Tuple[float, int]:
            return abs(member.reconstructed_hz - centre_hz), member.bin

        by_order = {
            order: min(members, key=distance)
            for order, members in utils.full_groupby(
                cluster.members, key=lambda member: member.order
            )
        }
        if len(by_order) < order_count:
            logger.debug(
                "Dropping cluster near %.1f Hz: orders %s of %d",
                centre_hz,
                sorted(by_order),
                order_count,
            )
            continue
        complete.append(_Cluster([by_order[order] for order in range(order_count)]))
    return complete


def _select_by_prior(
    clusters: t.List[_Cluster], priors_hz: t.Sequence[float], window_hz: float
) -> t.Dict[int, _Cluster]:
    selected = {}
    for tone_index, prior_hz in enumerate(priors_hz):
        distances = {
            index: abs(cluster.centre_hz - prior_hz)
            for index, cluster in enumerate(clusters)
        }
        nearby = [
            index for index, distance in distances.items() if distance <= window_hz
        ]
        if not nearby:
            logger.warning(
                "No complete cluster near the tone prior at %.1f Hz", prior_hz
            )
            continue
        selected[tone_index] = clusters[min(nearby, key=distances.__getitem__)]
    return selected


def _drop_aliases(
    selected: t.Dict[int, _Cluster],
    priors_hz: t.Sequence[float],
    rep_rate_hz: float,
    tolerance_hz: float,
) -> t.Dict[int, _Cluster]:
    """
    Two selected clusters a whole number of comb periods apart are read off one
    tone's lines. The tone further from its own prior keeps nothing.
    """

    def miss_hz(tone_index: int) -> t.Tuple[float, int]:
        return abs(selected[tone_index].centre_hz - priors_hz[tone_index]), tone_index

    rejected = set()
    for first, second in itertools.combinations(sorted(selected), 2):
        gap_hz = selected[second].centre_hz - selected[first].centre_hz
        periods = round(gap_hz / rep_rate_hz)
        if abs(gap_hz - periods * rep_rate_hz) > tolerance_hz:
            continue

        kept, dropped = sorted((first, second), key=miss_hz)
        logger.warning(
            "Cluster near %.1f Hz for the tone prior at %.1f Hz is an alias of the "
            "cluster for the tone prior at %.1f Hz; dropping it",
            selected[dropped].centre_hz,
            priors_hz[dropped],
            priors_hz[kept],
        )
        rejected.add(dropped)

    return {
        tone_index: cluster
        for tone_index, cluster in selected.items()
        if tone_index not in rejected
    }


def _check_partition(
    selected: t.Dict[int, _Cluster], peaks: t.Sequence[spectral.Peak]
) -> None:
    owners: t.Dict[int, t.List[int]] = {}
    for cluster_id, cluster in sorted(selected.items()):
        for peak_index in cluster.peak_indices:
            owners.setdefault(peak_index, []).append(cluster_id)

    shared = {
        peaks[peak_index].bin: cluster_ids
        for peak_index, cluster_ids in owners.items()
        if len(cluster_ids) > 1
    }
    if shared:
        raise AmbiguousAssignment(shared)
