"""Mayer lift, velocity hulls and penalized problems"""
