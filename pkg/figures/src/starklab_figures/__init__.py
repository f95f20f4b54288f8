"""Static figure rendering for starklab CSV outputs."""

from .io import InputError, read_table
from .recipes import RECIPES, FigureRecipe, build, render

__all__ = ["RECIPES", "FigureRecipe", "InputError", "build", "read_table", "render"]
