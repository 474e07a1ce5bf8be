# Synthetic CGH-like log ratios for one chromosome: a raised start that
# returns to zero at index 55. Writes cgh_like.csv.
import numpy as np, sys
seed=4; n=130; a=55
rng=np.random.default_rng(seed)
mu=np.where(np.arange(1,n+1)<=a,0.3,0.0)
y=mu+rng.normal(0,0.12,n)
with open(sys.argv[1] if len(sys.argv) > 1 else "cgh_like.csv","w") as f:
    f.write("chrom,pos,value\n")
    for i,v in enumerate(y): f.write(f"14,{20000+i*700},{v:.4f}\n")
