"""テストパッケージ

Matrix Freedman Toolkitのテストスイート
"""
