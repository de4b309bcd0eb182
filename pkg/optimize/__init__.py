"""Gap experiments, occupation LP and separation sampling"""
