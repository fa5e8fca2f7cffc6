"""gravphase: 重力誘起トポロジカル位相の計算・干渉計シミュレーション・KDP 格子検証"""
