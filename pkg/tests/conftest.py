import functools

import pytest

from pcfgppl import corpus_path
from pcfgppl.codegen import compile_file, compile_source

CORPUS = ("geometric", "fig5", "ssm", "crbd_toy")


@functools.lru_cache(maxsize=None)
def compiled(name: str):
    return compile_file(corpus_path(name))


@functools.lru_cache(maxsize=None)
def compiled_src(src: str):
    return compile_source(src)


@pytest.fixture(params=CORPUS)
def corpus_name(request):
    return request.param
