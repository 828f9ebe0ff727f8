"""Structure of the 14-junction gas network and the Schur vs dense timing trend."""
from graphsys.casestudies import gas_structure_report, paper_network, scaling_exponent

spec = paper_network(nx=3, nt=4)
rep = gas_structure_report(spec, k=13, sweep={"nxs": (3, 6, 12, 24)})
print(rep.to_text(), end="")
print(f"schur exponent  {scaling_exponent(rep.timings, 3):.2f}")
print(f"direct exponent {scaling_exponent(rep.timings, 4):.2f}")
