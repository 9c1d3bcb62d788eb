try:
    from ._omnivdiff import *  # noqa: F401,F403  (installed wheel layout)
except ImportError:
    from _omnivdiff import *  # noqa: F401,F403  (in-tree build on PYTHONPATH)
