import asyncio

import pytest

from newsflow import ConcurrentMap, Filter, FlatMap, FlowError, IterableSource, Map, Reduce, build_flow
from newsflow.dtypes import HttpError


class ATestException(Exception):
    pass


class RaiseEx:
    _counter = 0

    def __init__(self, raise_after):
        self._raise_after = raise_after

    def raise_ex(self, element):
        if self._counter == self._raise_after:
            raise ATestException("test")
        self._counter += 1
        return element


def test_functional_flow():
    termination_result = build_flow([
        IterableSource(range(10)),
        Map(lambda x: x + 1),
        Filter(lambda x: x < 3),
        FlatMap(lambda x: [x, x * 10]),
        Reduce(0, lambda acc, x: acc + x),
    ]).run()
    assert termination_result == 33


def test_async_functions():
    async def double(x):
        await asyncio.sleep(0)
        return x * 2

    async def is_even(x):
        return x % 2 == 0

    termination_result = build_flow([
        IterableSource(range(10)),
        Filter(is_even),
        Map(double),
        Reduce([], lambda acc, x: acc + [x]),
    ]).run()
    assert termination_result == [0, 4, 8, 12, 16]


def test_error_flow():
    with pytest.raises(FlowError) as info:
        build_flow([
            IterableSource(range(1000)),
            Map(lambda x: x + 1),
            Map(RaiseEx(500).raise_ex),
            Reduce(0, lambda acc, x: acc + x),
        ]).run()
    assert isinstance(info.value.__cause__, ATestException)


def test_domain_errors_are_not_wrapped():
    def fail(x):
        raise HttpError(404, 'http://example.com/')

    with pytest.raises(HttpError):
        build_flow([IterableSource([1]), Map(fail), Reduce(0, lambda acc, x: acc + x)]).run()


# Same as test_functional_flow but without using build_flow
def test_functional_flow_no_sugar():
    source = IterableSource(range(10))
    source.to(Map(lambda x: x + 1)).to(Filter(lambda x: x < 3)).to(Reduce(0, lambda acc, x: acc + x))
    assert source.run() == 3


def test_step_has_one_outlet():
    step = Map(lambda x: x)
    step.to(Reduce(0, lambda acc, x: acc + x))
    with pytest.raises(ValueError):
        step.to(Reduce(0, lambda acc, x: acc + x))


def test_reduce_is_terminal():
    with pytest.raises(ValueError):
        Reduce(0, lambda acc, x: acc + x).to(Map(lambda x: x))


def test_empty_flow():
    with pytest.raises(ValueError):
        build_flow([])


def test_map_needs_callable():
    with pytest.raises(TypeError):
        Map(5)


def test_concurrent_map_keeps_order():
    async def slow_for_small(x):
        await asyncio.sleep(0.001 * (10 - x))
        return x * x

    termination_result = build_flow([
        IterableSource(range(10)),
        ConcurrentMap(slow_for_small, max_in_flight=4),
        Reduce([], lambda acc, x: acc + [x]),
    ]).run()
    assert termination_result == [x * x for x in range(10)]


def test_concurrent_map_bounds_in_flight():
    in_flight = 0
    peak = 0

    async def track(x):
        nonlocal in_flight, peak
        in_flight += 1
        peak = max(peak, in_flight)
        await asyncio.sleep(0.001)
        in_flight -= 1
        return x

    termination_result = build_flow([
        IterableSource(range(20)),
        ConcurrentMap(track, max_in_flight=3),
        Reduce(0, lambda acc, x: acc + 1),
    ]).run()
    assert termination_result == 20
    assert 1 < peak <= 3


def test_concurrent_map_error():
    async def fail_on_five(x):
        if x == 5:
            raise ATestException('five')
        return x

    with pytest.raises(FlowError) as info:
        build_flow([
            IterableSource(range(10)),
            ConcurrentMap(fail_on_five, max_in_flight=2),
            Reduce(0, lambda acc, x: acc + x),
        ]).run()
    assert isinstance(info.value.__cause__, ATestException)


def test_concurrent_map_needs_coroutine_function():
    with pytest.raises(TypeError):
        ConcurrentMap(lambda x: x)
    with pytest.raises(ValueError):
        async def noop(x):
            return x
        ConcurrentMap(noop, max_in_flight=0)


def test_run_async():
    async def main():
        return await build_flow([IterableSource([1, 2, 3]), Reduce(0, lambda acc, x: acc + x)]).run_async()

    assert asyncio.run(main()) == 6


def test_concurrent_map_cancels_pending_jobs_on_error():
    finished = []

    async def fail_first(x):
        if x == 0:
            await asyncio.sleep(0.001)
            raise ATestException('zero')
        await asyncio.sleep(0.05)
        finished.append(x)
        return x

    async def main():
        with pytest.raises(FlowError):
            await build_flow([
                IterableSource(range(4)),
                ConcurrentMap(fail_first, max_in_flight=4),
                Reduce(0, lambda acc, x: acc + x),
            ]).run_async()
        await asyncio.sleep(0.1)

    asyncio.run(main())
    assert finished == []
