"""Winding numbers, shell partitions and ball-box diagnostics"""
