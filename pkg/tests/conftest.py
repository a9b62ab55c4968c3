import pytest

from branchgen import parse_universe

TREE_SRC = "data Tree = LeafA | LeafB | LeafC | Node Tree Tree"
TREEP_SRC = "data Tree' = Leaf | NodeA Tree' Tree' | NodeB Tree'"
TREEPP_SRC = "data Tree'' = LeafA | LeafB | NodeA Tree'' Tree'' | NodeB Tree''"
T1T2_SRC = "data T1 = A | B T1 T2\ndata T2 = C | D T1"
DERIVE_SRC = "data T = A | B T T | C T T"
COMPOSITE_SRC = """
data Bool = True | False
data Maybe a = Nothing | Just a
data Tree = LeafA (Maybe Bool) | LeafB Bool Bool | LeafC | Node Tree Tree
"""


@pytest.fixture(scope="session")
def tree_u():
    return parse_universe(TREE_SRC, "Tree")


@pytest.fixture(scope="session")
def treep_u():
    return parse_universe(TREEP_SRC, "Tree'")


@pytest.fixture(scope="session")
def treepp_u():
    return parse_universe(TREEPP_SRC, "Tree''")


@pytest.fixture(scope="session")
def t1t2_u():
    return parse_universe(T1T2_SRC, "T1")


@pytest.fixture(scope="session")
def derive_u():
    return parse_universe(DERIVE_SRC, "T")


@pytest.fixture(scope="session")
def composite_u():
    return parse_universe(COMPOSITE_SRC, "Tree")
