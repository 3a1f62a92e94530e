import functools
import operator
import typing


def prod(shape: typing.Iterable[int]) -> int:
    return functools.reduce(operator.mul, shape, 1)


def ceil_div(numerator: int, denominator: int) -> int:
    return -(-numerator // denominator)


def parse_list(text: str, cast: typing.Callable = int) -> list:
    """
    Parse a comma separated command line list such as "1,2,4,8".
    """

    return [cast(item.strip()) for item in text.split(sep=",") if item.strip()]
