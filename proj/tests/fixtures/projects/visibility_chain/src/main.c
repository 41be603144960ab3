#include <stdio.h>

int b_value(int x);

int main(void) {
  int v = b_value(4);
  printf("%d\n", v);
  return v == 13 ? 0 : 1;
}
