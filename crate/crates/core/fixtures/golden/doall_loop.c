for (k = 0; k < n; k++)
    c[k] = a[k] + b[k];
