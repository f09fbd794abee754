"""
How much faster can bit-serial be?
==================================

"""
from bitserial.perfmodel import (CORTEX_A7, CORTEX_A53, max_bit_product, model_table,
                                 predicted_gops, speedup_bound)

for p in (CORTEX_A7, CORTEX_A53):
    print(model_table(p, max_bits=3))
    print()

# each extra bit on either side adds a full set of binary products
for bits in [(1, 1), (1, 2), (2, 2), (3, 3)]:
    print(bits, "A7 bound %.2fx" % speedup_bound(CORTEX_A7, *bits),
          " A53 bound %.2fx" % speedup_bound(CORTEX_A53, *bits))

print("break-even bit products:", max_bit_product(CORTEX_A7), max_bit_product(CORTEX_A53))
print("A53 binary peak: %.0f GOP/s" % predicted_gops(CORTEX_A53, "binary"))
