import os
from concurrent.futures import Executor, Future, ProcessPoolExecutor
from typing import Callable, Iterable, Iterator


class SerialExecutor(Executor):
    """Runs submitted work in the calling process, in submission order."""

    def submit(self, fn: Callable, /, *args, **kwargs) -> Future:
        future: Future = Future()
        try:
            future.set_result(fn(*args, **kwargs))
        except BaseException as exc:
            future.set_exception(exc)
        return future

    def map(self, fn: Callable, *iterables: Iterable, **kwargs) -> Iterator:
        return map(fn, *iterables)


def get_executor(workers: int) -> Executor:
    if workers <= 1:
        return SerialExecutor()
    return ProcessPoolExecutor(max_workers=min(workers, os.cpu_count() or 1))
