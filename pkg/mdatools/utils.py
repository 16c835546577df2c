import hashlib
import itertools
import typing as t

T = t.TypeVar("T")
K = t.TypeVar("K")


def full_groupby(
    iterable: t.Iterable[T], key: t.Callable[[T], K]
) -> t.Iterator[t.Tuple[K, t.Iterator[T]]]:
    return itertools.groupby(sorted(iterable, key=key), key=key)  # type: ignore


def derive_seed(base_seed: int, *labels: t.Union[int, str]) -> int:
    """
    Stable 64-bit seed for a (base seed, labels...) pair, independent of process,
    platform and scheduling order
    """
    text = ":".join(str(part) for part in (base_seed, *labels))
    digest = hashlib.blake2b(text.encode("ascii"), digest_size=8).digest()
    return int.from_bytes(digest, "big")
