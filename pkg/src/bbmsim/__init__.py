"""P1 finite element solver for the BBM-BBM Boussinesq system on triangle meshes."""

__version__ = "0.1.0"
