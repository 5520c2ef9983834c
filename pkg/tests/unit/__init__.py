# ユニットテスト用パッケージ