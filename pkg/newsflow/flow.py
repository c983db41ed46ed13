import asyncio
from typing import Any, Awaitable, Callable, Iterable, List, Optional

from .dtypes import FlowError, NewsflowError

_termination_obj = object()


class Flow:
    """Base class of all steps. A step receives elements through _do() and passes results to its outlet."""

    def __init__(self, name: Optional[str] = None):
        self._outlet = None
        self.name = name or type(self).__name__

    def to(self, outlet):
        if self._outlet is not None:
            raise ValueError(f'{self.name} is already connected to {self._outlet.name}')
        self._outlet = outlet
        return outlet

    async def _do(self, element):
        raise NotImplementedError

    async def _do_downstream(self, element):
        if self._outlet is None:
            return None
        return await self._outlet._do(element)


class IterableSource(Flow):
    """
    Emits the elements of an iterable into the flow, then terminates it.

    :param elements: Elements to emit, in order.
    """

    def __init__(self, elements: Iterable[Any], **kwargs):
        super().__init__(**kwargs)
        self._elements = elements

    async def run_async(self):
        """Runs the flow to completion and returns its termination result (e.g. that of a Reduce step)."""
        try:
            for element in self._elements:
                await self._do_downstream(element)
            return await self._do_downstream(_termination_obj)
        except NewsflowError:
            raise
        except Exception as ex:
            raise FlowError(f'Flow execution terminated due to an error in {self.name}') from ex

    def run(self):
        return asyncio.run(self.run_async())


class _UnaryFunctionFlow(Flow):
    def __init__(self, fn: Callable, **kwargs):
        super().__init__(**kwargs)
        if not callable(fn):
            raise TypeError(f'Expected a callable, got {type(fn)}')
        self._is_async = asyncio.iscoroutinefunction(fn)
        self._fn = fn

    async def _call(self, element):
        res = self._fn(element)
        if self._is_async:
            res = await res
        return res

    async def _do_internal(self, element, fn_result):
        raise NotImplementedError()

    async def _do(self, element):
        if element is _termination_obj:
            return await self._do_downstream(_termination_obj)
        fn_result = await self._call(element)
        await self._do_internal(element, fn_result)


class Map(_UnaryFunctionFlow):
    """Transforms each element with fn."""

    async def _do_internal(self, element, fn_result):
        await self._do_downstream(fn_result)


class Filter(_UnaryFunctionFlow):
    """Passes on only the elements for which fn returns a truthy value."""

    async def _do_internal(self, element, keep):
        if keep:
            await self._do_downstream(element)


class FlatMap(_UnaryFunctionFlow):
    """Transforms each element into any number of elements. fn returns an iterable."""

    async def _do_internal(self, element, fn_result):
        for result_element in fn_result:
            await self._do_downstream(result_element)


class Reduce(Flow):
    """
    Reduces incoming elements into a single value, returned when the flow terminates.

    :param initial_value: Starting value.
    :param fn: Function applied to the current value and each element.
    """

    def __init__(self, initial_value, fn: Callable[[Any, Any], Any], **kwargs):
        super().__init__(**kwargs)
        if not callable(fn):
            raise TypeError(f'Expected a callable, got {type(fn)}')
        self._fn = fn
        self._result = initial_value

    def to(self, outlet):
        raise ValueError('Reduce is a terminal step. It cannot be piped further.')

    async def _do(self, element):
        if element is _termination_obj:
            return self._result
        self._result = self._fn(self._result, element)


class ConcurrentMap(Flow):
    """
    Applies an async function to elements with up to max_in_flight calls running at once.
    Results are emitted in input order, whatever order the calls complete in.

    :param fn: Coroutine function applied to each element.
    :param max_in_flight: Maximum number of concurrent calls. Defaults to 8.
    """

    def __init__(self, fn: Callable[[Any], Awaitable[Any]], max_in_flight: int = 8, **kwargs):
        super().__init__(**kwargs)
        if not asyncio.iscoroutinefunction(fn):
            raise TypeError(f'Expected a coroutine function, got {type(fn)}')
        if max_in_flight < 1:
            raise ValueError('max_in_flight must be positive')
        self._fn = fn
        self._max_in_flight = max_in_flight
        self._q = None
        self._slots = None
        self._worker_awaitable = None

    async def _worker(self):
        try:
            while True:
                job = await self._q.get()
                if job is _termination_obj:
                    break
                try:
                    completed = await job
                finally:
                    self._slots.release()
                await self._do_downstream(completed)
        except BaseException:
            self._cancel_pending()
            raise

    def _cancel_pending(self):
        while not self._q.empty():
            job = self._q.get_nowait()
            if job is not _termination_obj:
                job.cancel()
                self._slots.release()

    async def _do(self, element):
        if not self._q:
            self._q = asyncio.Queue()
            self._slots = asyncio.Semaphore(self._max_in_flight)
            self._worker_awaitable = asyncio.get_running_loop().create_task(self._worker())

        if element is _termination_obj:
            await self._q.put(_termination_obj)
            await self._worker_awaitable
            return await self._do_downstream(_termination_obj)

        await self._slots.acquire()
        if self._worker_awaitable.done():
            await self._worker_awaitable
            raise FlowError(f'{self.name} worker has already terminated')
        self._q.put_nowait(asyncio.get_running_loop().create_task(self._fn(element)))


def build_flow(steps: List[Flow]) -> Flow:
    """Builds a flow from a list of steps, by chaining the steps according to their order in the list.

    Example:
        build_flow([step1, step2, step3])
        is equivalent to
        step1.to(step2).to(step3)

    :param steps: steps, source first
    :returns: the first step
    """
    if len(steps) == 0:
        raise ValueError('Cannot build an empty flow')
    for step, next_step in zip(steps, steps[1:]):
        step.to(next_step)
    return steps[0]
