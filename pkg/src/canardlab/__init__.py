"""canardlab: a numerical laboratory for canard limit cycles of
non-linearly regularized planar piecewise-smooth vector fields."""

__version__ = "0.1.0"
