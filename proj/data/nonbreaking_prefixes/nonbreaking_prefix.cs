#Anything in this file, followed by a period (and an upper-case word), does NOT indicate an end-of-sentence marker.
#Special cases are included for prefixes that ONLY appear before 0-9 numbers.

#any single upper case letter followed by a period is not a sentence ender
A
B
C
D
E
F
G
H
I
J
K
L
M
N
O
P
Q
R
S
T
U
V
W
X
Y
Z

#Titles and abbreviations
Bc
Ing
Mgr
MUDr
JUDr
PhDr
RNDr
doc
prof
dr
p
pí
sl
fa
fy
aj
apod
atd
atp
event
mj
např
popř
př
přib
resp
tj
tzn
tzv
zvl
kap
odst
písm
ul
nám
hod
min
sek
str
sv
sb

#Numbers only
č #NUMERIC_ONLY#
čís #NUMERIC_ONLY#
tel #NUMERIC_ONLY#
pp #NUMERIC_ONLY#
