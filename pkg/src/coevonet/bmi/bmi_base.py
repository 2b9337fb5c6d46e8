from bmipy import Bmi
from numpy.typing import NDArray

__all__ = ["SCALAR_GRID", "BmiBase"]

SCALAR_GRID = 0


class BmiBase(Bmi):
    """Base BMI for models whose variables are all scalars on a single rank-0 grid

    Subclasses provide ``initialize``, ``update``, ``finalize``, the variable name lists and
    ``get_value_ptr``. Variable metadata (type, size, bytes) is derived from the array returned by
    ``get_value_ptr``; every variable lives on grid 0 with one node. Mesh queries that have no
    meaning on a scalar grid raise NotImplementedError.

    Args:
        Bmi (Bmi): Base BMI abstract class
    """

    def get_component_name(self) -> str:
        """Name of this BMI module component.

        Returns
        -------
            str: Model Name
        """
        return self.__class__.__name__

    def get_value(self, name: str, dest: NDArray) -> NDArray:
        dest[:] = self.get_value_ptr(name).reshape(-1)
        return dest

    def get_value_at_indices(self, name: str, dest: NDArray, inds: NDArray) -> NDArray:
        dest[:] = self.get_value_ptr(name).reshape(-1)[inds]
        return dest

    def set_value_at_indices(self, name: str, inds: NDArray, src: NDArray) -> None:
        if len(inds) != 1 or int(inds[0]) != 0:
            raise IndexError(f"{name} is a scalar; the only valid index is 0")
        self.set_value(name, src)

    def get_var_nbytes(self, name: str) -> int:
        """Get the number of total bytes required to represent the variable.

        Args:
            name (str): Name of variable.

        Returns
        -------
            int: Size of data array in bytes.
        """
        return self.get_value_ptr(name).nbytes

    def get_var_itemsize(self, name: str) -> int:
        return self.get_value_ptr(name).itemsize

    def get_var_type(self, name: str) -> str:
        """Data type of the variable.

        Args:
            name (str): Name of variable.

        Returns
        -------
            str: Data type.
        """
        return str(self.get_value_ptr(name).dtype)

    def get_var_grid(self, name: str) -> int:
        self.get_value_ptr(name)
        return SCALAR_GRID

    def get_var_location(self, name: str) -> str:
        self.get_value_ptr(name)
        return "none"

    def get_var_units(self, name: str) -> str:
        """Units of the given variable; rates, densities and counts are dimensionless

        Args:
            name (str): variable name

        Returns
        -------
            str: units
        """
        self.get_value_ptr(name)
        return "1"

    def get_start_time(self) -> float:
        return 0.0

    def get_time_units(self) -> str:
        return "1"

    # scalar grid
    def _check_grid(self, grid: int) -> None:
        if grid != SCALAR_GRID:
            raise KeyError(f"unknown grid {grid}; all variables live on grid {SCALAR_GRID}")

    def get_grid_rank(self, grid: int) -> int:
        self._check_grid(grid)
        return 0

    def get_grid_size(self, grid: int) -> int:
        self._check_grid(grid)
        return 1

    def get_grid_type(self, grid: int) -> str:
        self._check_grid(grid)
        return "scalar"

    def get_grid_node_count(self, grid: int) -> int:
        self._check_grid(grid)
        return 1

    def get_grid_edge_count(self, grid: int) -> int:
        self._check_grid(grid)
        return 0

    def get_grid_face_count(self, grid: int) -> int:
        self._check_grid(grid)
        return 0

    def get_grid_shape(self, grid: int, shape: NDArray) -> NDArray:
        raise NotImplementedError()

    def get_grid_spacing(self, grid: int, spacing: NDArray) -> NDArray:
        raise NotImplementedError()

    def get_grid_origin(self, grid: int, origin: NDArray) -> NDArray:
        raise NotImplementedError()

    def get_grid_x(self, grid: int, x: NDArray) -> NDArray:
        raise NotImplementedError()

    def get_grid_y(self, grid: int, y: NDArray) -> NDArray:
        raise NotImplementedError()

    def get_grid_z(self, grid: int, z: NDArray) -> NDArray:
        raise NotImplementedError()

    def get_grid_edge_nodes(self, grid: int, edge_nodes: NDArray) -> NDArray:
        raise NotImplementedError()

    def get_grid_face_edges(self, grid: int, face_edges: NDArray) -> NDArray:
        raise NotImplementedError()

    def get_grid_face_nodes(self, grid: int, face_nodes: NDArray) -> NDArray:
        raise NotImplementedError()

    def get_grid_nodes_per_face(self, grid: int, nodes_per_face: NDArray) -> NDArray:
        raise NotImplementedError()
