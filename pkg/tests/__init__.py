"""
Test package for PLP-GEM
"""
