import pytest

from polympe.agglomerate import AgglomerationConfig, agglomerate
from polympe.families import VERIFICATION_DIRICHLET, cartesian_two_domain, triangulated_two_domain
from polympe.manufactured import steady_case, unsteady_case
from polympe.mesh import PolyMesh, build_faces
from polympe.params import PhysicalParams
from polympe.spaces import build_space


def unit_square_mesh(domain="elastic"):
    return PolyMesh(
        [[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2, 3]], [domain],
        {(0, 1): "nat", (1, 2): "nat", (2, 3): "nat", (0, 3): "nat"},
    )


def two_square_mesh():
    return PolyMesh(
        [[-1, 0], [0, 0], [1, 0], [1, 1], [0, 1], [-1, 1]],
        [[0, 1, 4, 5], [1, 2, 3, 4]], ["elastic", "fluid"],
        {(0, 1): "el", (0, 5): "el", (4, 5): "el",
         (1, 2): "wall", (2, 3): "out", (3, 4): "wall"},
    )


@pytest.fixture(scope="session")
def unit_params():
    return PhysicalParams.unit()


@pytest.fixture(scope="session")
def steady():
    return steady_case()


@pytest.fixture(scope="session")
def unsteady():
    return unsteady_case()


@pytest.fixture(scope="session")
def mesh80():
    """N = 80 polygonal mesh (40 + 40 agglomerated), h close to 0.273."""
    fine = triangulated_two_domain(24, jitter=0.25)
    return agglomerate(fine, AgglomerationConfig(40, 40, seed=0))


@pytest.fixture(scope="session")
def poly_family(mesh80):
    """Agglomerated meshes with 20, 80, 320 polygons."""
    meshes = [agglomerate(triangulated_two_domain(12, jitter=0.25),
                          AgglomerationConfig(10, 10, seed=0)),
              mesh80,
              agglomerate(triangulated_two_domain(48, jitter=0.25),
                          AgglomerationConfig(160, 160, seed=0))]
    return meshes


@pytest.fixture(scope="session")
def cart4_setup(unit_params):
    mesh = cartesian_two_domain(4)
    faces = build_faces(mesh, VERIFICATION_DIRICHLET)
    space = build_space(mesh, 2)
    return mesh, faces, space
