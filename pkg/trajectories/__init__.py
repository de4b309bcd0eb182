"""Control paths, integrators, admissibility and cap connectors"""
