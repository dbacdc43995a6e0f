# GridThreat
