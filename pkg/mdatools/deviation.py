"""
Exact arithmetic of comb presampling: index decomposition of a frequency on an
FFT grid, the picket-fence deviation of each comb order, and its multi-order
average.

A tone f = (m + δ)·f_res measured directly lands on bin m + [δ], so its
deviation is ([δ] − δ)·f_res. Its copy shifted down by n comb lines,
f − n·f_c with f_c = (α + ε)·f_res, carries the deviation
([rmod(δ − nε)] − rmod(δ − nε))·f_res once the n·f_c shift is added back.
"""
import dataclasses
import math
import typing as t

if t.TYPE_CHECKING:
    from mdatools.model import CombSpec, FrequencyGrid

# Bin ratios this close to an integer are taken to be exactly on the grid
_GRID_SNAP = 1e-6
# Fractional parts this close to one half are exact rounding ties
_TIE_SNAP = 1e-9


class DomainError(ValueError):
    pass


class FoldError(DomainError):
    def __init__(self, freq_hz: float, rep_rate_hz: float, order: int) -> None:
        super().__init__(freq_hz, rep_rate_hz, order)
        self.freq_hz = freq_hz
        self.rep_rate_hz = rep_rate_hz
        self.order = order

    def __str__(self) -> str:
        return (
            f"Order {self.order} of the {self.rep_rate_hz} Hz comb folds "
            f"{self.freq_hz} Hz through DC"
        )


@dataclasses.dataclass(frozen=True)
class FrequencyIndex:
    integer_part: int
    fractional_part: float


@dataclasses.dataclass(frozen=True)
class DeviationRecord:
    order: int
    deviation_bins: float
    deviation_hz: float


def index_of(freq_hz: float, grid: "FrequencyGrid") -> FrequencyIndex:
    if not math.isfinite(freq_hz) or freq_hz < 0:
        raise DomainError(f"Frequency must be finite and non-negative, got {freq_hz}")

    ratio = freq_hz / grid.resolution_hz
    nearest = round(ratio)
    if abs(ratio - nearest) < _GRID_SNAP:
        return FrequencyIndex(int(nearest), 0.0)

    integer_part = math.floor(ratio)
    return FrequencyIndex(integer_part, ratio - integer_part)


def frac_mod1(x: float) -> float:
    """
    Fractional part with the floor convention, so negative arguments land in
    [0, 1) as well: frac_mod1(-0.3) == 0.7
    """
    result = x - math.floor(x)
    # -1e-20 - floor(-1e-20) rounds up to exactly 1.0
    if result >= 1.0:
        return 0.0
    return result


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _rounding_residual(fraction: float) -> float:
    if abs(fraction - 0.5) <= _TIE_SNAP:
        fraction = 0.5
    return round_half_up(fraction) - fraction


def delta_single(delta: float) -> float:
    return _rounding_residual(frac_mod1(delta))


def delta_order(delta: float, epsilon: float, n: int) -> float:
    if n < 0:
        raise DomainError(f"Comb order must be non-negative, got {n}")

    return _rounding_residual(frac_mod1(delta - n * epsilon))


def delta_mda(delta: float, epsilon: float, order_count: int) -> float:
    if order_count < 1:
        raise DomainError(f"At least one order is required, got {order_count}")

    return (
        math.fsum(delta_order(delta, epsilon, n) for n in range(order_count))
        / order_count
    )


def copy_frequency(f_in_hz: float, comb: "CombSpec", n: int) -> float:
    if n < 0:
        raise DomainError(f"Comb order must be non-negative, got {n}")

    copy_hz = f_in_hz - n * comb.rep_rate_hz
    if copy_hz <= 0:
        raise FoldError(f_in_hz, comb.rep_rate_hz, n)
    return copy_hz


def reconstruct(f_meas_zone_hz: float, comb: "CombSpec", n: int) -> float:
    if f_meas_zone_hz < 0:
        raise DomainError(
            f"Measured frequency must be non-negative, got {f_meas_zone_hz}"
        )
    if n < 0:
        raise DomainError(f"Comb order must be non-negative, got {n}")

    return f_meas_zone_hz + n * comb.rep_rate_hz


def nyquist_zone(freq_hz: float, comb: "CombSpec") -> int:
    """1-based Nyquist zone of the comb, each zone f_c/2 wide"""
    if freq_hz < 0:
        raise DomainError(f"Frequency must be non-negative, got {freq_hz}")

    return math.floor(freq_hz / (comb.rep_rate_hz / 2)) + 1
