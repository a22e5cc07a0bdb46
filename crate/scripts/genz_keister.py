"""Nested Genz-Keister extensions of the standard-normal Gauss rule.

Each stage adds the roots of the monic polynomial orthogonal (under the
normal density) to all lower-degree polynomials times the node polynomial of
the previous stage. Prints the nonnegative half of every stage as Rust data.
"""
import mpmath as mp
mp.mp.dps = 80
def mom(k):  # E[x^k] standard normal
    if k % 2: return mp.mpf(0)
    return mp.fac2(k-1) if k>0 else mp.mpf(1)
def polymul(a,b):
    r=[mp.mpf(0)]*(len(a)+len(b)-1)
    for i,x in enumerate(a):
        for j,y in enumerate(b): r[i+j]+=x*y
    return r
def integ(c):  # c coefficients low->high
    return sum(ci*mom(i) for i,ci in enumerate(c))
def extend(nodes, m):
    w=[mp.mpf(1)]
    for x in nodes: w=polymul(w,[-x,mp.mpf(1)])
    # monic p of degree m: p = x^m + sum_{j<m} a_j x^j ; conditions int p x^k w phi =0, k<m
    A=mp.matrix(m,m); b=mp.matrix(m,1)
    for k in range(m):
        base=polymul(w,[0]*k+[1])
        for j in range(m):
            A[k,j]=integ(polymul(base,[0]*j+[1]))
        b[k]=-integ(polymul(base,[0]*m+[1]))
    a=mp.lu_solve(A,b)
    coeffs=[a[j] for j in range(m)]+[mp.mpf(1)]
    roots=mp.polyroots(coeffs[::-1],maxsteps=500,extraprec=400)
    return sorted([mp.re(r) for r in roots]), max(abs(mp.im(r)) for r in roots)
def weights(nodes):
    n=len(nodes)
    A=mp.matrix(n,n); b=mp.matrix(n,1)
    for k in range(n):
        for j in range(n): A[k,j]=nodes[j]**k
        b[k]=mom(k)
    return mp.lu_solve(A,b)
nodes=[mp.mpf(0)]
levels=[list(nodes)]
for m in [2,6,10,16]:
    new,im=extend(nodes,m)
    nodes=sorted(nodes+new)
    levels.append(list(nodes))
    assert im < mp.mpf(10)**-40

for lv in levels:
    w = weights(lv)
    half = [(x, wt) for x, wt in zip(lv, w) if x >= 0]
    print(f"// {len(lv)} points")
    print("&[")
    for x, wt in half:
        print(f"    ({mp.nstr(x, 20, min_fixed=-30, max_fixed=30)}, {mp.nstr(wt, 20)}),")
    print("],")
